"""Scalar quadrature and root-finding used by the threshold and profile code."""

import math

__all__ = ["adaptive_simpson", "bisect", "tail_integral", "tail_integral_derivative"]


def adaptive_simpson(f, a, b, tol=1e-13, max_depth=60):
    """Integrate ``f`` over ``[a, b]`` by adaptive Simpson with Richardson correction.

    The tolerance is absolute and is split between the two halves at every
    refinement. Uses an explicit stack so deep refinement near an endpoint
    singularity does not hit the recursion limit.
    """
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        a, b, fa, fm, fb, whole, eps, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) * (fa + 4.0 * flm + fm) / 6.0
        right = (b - m) * (fm + 4.0 * frm + fb) / 6.0
        delta = left + right - whole
        if depth >= max_depth or abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
        else:
            stack.append((a, m, fa, flm, fm, left, 0.5 * eps, depth + 1))
            stack.append((m, b, fm, frm, fb, right, 0.5 * eps, depth + 1))
    return sign * total


def bisect(f, a, b, xtol=1e-15, maxiter=200):
    """Bisection for a sign change of ``f`` on ``[a, b]``.

    Raises ValueError when the endpoints do not bracket a root.
    """
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if (fa > 0) == (fb > 0):
        raise ValueError(f"no sign change on [{a!r}, {b!r}]: f(a)={fa:.3e}, f(b)={fb:.3e}")
    for _ in range(maxiter):
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0 or 0.5 * (b - a) < xtol:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _tail_from_below_one(xi, q, tol):
    # s = 1 - w^2 removes the derivative singularity of (1 - s^2)^q at s = 1
    upper = math.sqrt(1.0 - xi)

    def integrand(w):
        if w == 0.0:
            return 0.0
        return 2.0 * w ** (1.0 + 2.0 * q) * (2.0 - w * w) ** q

    return adaptive_simpson(integrand, 0.0, upper, tol=tol)


def tail_integral(xi, p, tol=1e-13):
    """Return the integral of ``(1 - s^2)^(2/(p-1))`` over ``[xi, 1]`` for ``-1 <= xi <= 1``."""
    if not -1.0 <= xi <= 1.0:
        raise ValueError(f"xi must lie in [-1, 1], got {xi}")
    q = 2.0 / (p - 1.0)
    if xi >= 0.0:
        return _tail_from_below_one(xi, q, tol)
    # integrand is even: int_xi^1 = 2 int_0^1 - int_|xi|^1
    full = _tail_from_below_one(0.0, q, tol / 2)
    return 2.0 * full - _tail_from_below_one(-xi, q, tol / 2)


def tail_integral_derivative(xi, p):
    """Derivative of :func:`tail_integral` with respect to ``xi``."""
    return -((1.0 - xi * xi) ** (2.0 / (p - 1.0)))
