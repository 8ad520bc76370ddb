"""Freeze reference values from high-precision oracles that share no code with the package.

xi(p): mpmath quadrature of (1 - s^2)^q on [xi, 1] and bisection at 40 digits.
t1, t2: mpmath findroot on the original two-equation system.
"""

import json
import sys
from pathlib import Path

import mpmath as mp

mp.mp.dps = 40


def xi_root(p):
    p = mp.mpf(p)
    q = 2 / (p - 1)

    def f(x):
        tail = mp.quad(lambda s: (1 - s * s) ** q, [x, 1])
        return (p - 5) / 2 * tail - x * (1 - x * x) ** q

    a, b = mp.mpf("1e-30"), mp.mpf(1) - mp.mpf("1e-30")
    fa = f(a)
    for _ in range(140):
        m = (a + b) / 2
        fm = f(m)
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return (a + b) / 2


def t1_t2(gamma, omega, p):
    gamma, omega, p = mp.mpf(gamma), mp.mpf(omega), mp.mpf(p)
    k = gamma * mp.sqrt(omega)

    def g(t):
        return t ** (p - 1) - t ** (p + 1)

    # asymmetric root: t1 small, t2 near 1; bisection on t1 in (1/k, 2/k)
    def F(t1):
        t2 = t1 / (k * t1 - 1)
        return g(t1) - g(t2)

    lo = 1 / k * (1 + mp.mpf("1e-6"))
    hi = 2 / k * (1 - mp.mpf("1e-12"))
    # the trivial root t1 = 2/k sits at hi; look for the sign change below it
    grid = [lo + (hi - lo) * i / 4000 for i in range(4001)]
    vals = [F(t) for t in grid]
    for i in range(len(grid) - 1):
        if (vals[i] > 0) != (vals[i + 1] > 0):
            a, b = grid[i], grid[i + 1]
            break
    else:
        raise RuntimeError("no asymmetric root")
    t1 = mp.findroot(F, (a, b), solver="anderson")
    t2 = t1 / (k * t1 - 1)
    return t1, t2


def main(out):
    data = {"xi": {}, "t1t2": []}
    for p in ("5.5", "6", "7", "9", "5.1", "12", "200"):
        data["xi"][p] = mp.nstr(xi_root(p), 25)
        print("xi", p, data["xi"][p])
    for gamma, omega, p in (("2", "10", "6"), ("2", "5", "7"), ("1", "20", "6"), ("2", "100", "6")):
        t1, t2 = t1_t2(gamma, omega, p)
        data["t1t2"].append({"gamma": gamma, "omega": omega, "p": p, "t1": mp.nstr(t1, 25),
                             "one_minus_t2": mp.nstr(1 - t2, 25)})
        print("t1t2", gamma, omega, p, t1, 1 - t2)
    Path(out).write_text(json.dumps(data, indent=2) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures/oracle_values.json")
