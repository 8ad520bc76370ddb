"""Conserved quantities, action-type functionals and instability thresholds.

Sampled functionals take a field plus the model constants. The closed-form
evaluations (vertex value, ``||Phi||_{p+1}^{p+1}``, ground-state level) go
through the tail integral of ``(1 - s^2)^(2/(p-1))`` computed by adaptive
Simpson, independent of any sampled profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._numerics import adaptive_simpson, bisect, tail_integral, tail_integral_derivative
from .grid import derivative, integrate, lp_norm_pow
from .profiles import (
    Branch,
    DeltaPrimeParams,
    asymmetric_threshold,
    build_profile_delta,
    log_sech,
    scale_field,
)

__all__ = [
    "FunctionalReport",
    "ThresholdResult",
    "SecondVariation",
    "GInequalityReport",
    "kinetic",
    "mass",
    "energy_delta",
    "action_delta",
    "nehari_delta",
    "virial_p_delta",
    "functional_report",
    "line_action_delta",
    "vertex_value_sq_closed",
    "profile_lp_norm_closed",
    "profile_mass_closed",
    "dc_ground_level",
    "threshold_function",
    "instability_threshold",
    "second_variation_E",
    "lambda_one",
    "lambda_zero",
    "g_inequality",
    "g_inequality_check",
    "delta_prime_functionals",
    "delta_prime_jump_sq_closed",
    "delta_prime_lp_norm_closed",
    "delta_prime_instability_condition",
    "estimate_omega2",
]


@dataclass(frozen=True)
class FunctionalReport:
    mass: float
    energy: float
    action: float
    nehari: float
    virial_p: float
    vertex_abs2: float
    kinetic: float = float("nan")
    lp_pow: float = float("nan")


def kinetic(field, rule="trapezoid"):
    """``||u'||_2^2`` with the second-order stencil."""
    d = derivative(field).edges
    return integrate(np.abs(d) ** 2, field.grid, rule)


def mass(field, rule="trapezoid"):
    return lp_norm_pow(field, 2, rule)


def _parts(field, p, rule):
    return kinetic(field, rule), mass(field, rule), lp_norm_pow(field, p + 1, rule), field.vertex_abs2


def energy_delta(field, alpha, p, rule="trapezoid"):
    """``E = 1/2 ||V'||^2 + alpha/2 |v(0)|^2 - ||V||_{p+1}^{p+1}/(p+1)``."""
    k, _, lp, v0 = _parts(field, p, rule)
    return 0.5 * k + 0.5 * alpha * v0 - lp / (p + 1)


def action_delta(field, alpha, omega, p, rule="trapezoid"):
    k, m, lp, v0 = _parts(field, p, rule)
    return 0.5 * k + 0.5 * omega * m - lp / (p + 1) + 0.5 * alpha * v0


def nehari_delta(field, alpha, omega, p, rule="trapezoid"):
    k, m, lp, v0 = _parts(field, p, rule)
    return k + omega * m - lp + alpha * v0


def virial_p_delta(field, alpha, p, rule="trapezoid"):
    k, _, lp, v0 = _parts(field, p, rule)
    return k + 0.5 * alpha * v0 - (p - 1) / (2 * (p + 1)) * lp


def functional_report(field, alpha, omega, p, rule="trapezoid"):
    """All delta-graph functionals of one field from a single pass over the norms."""
    k, m, lp, v0 = _parts(field, p, rule)
    energy = 0.5 * k + 0.5 * alpha * v0 - lp / (p + 1)
    return FunctionalReport(
        mass=m,
        energy=energy,
        action=energy + 0.5 * omega * m,
        nehari=k + omega * m - lp + alpha * v0,
        virial_p=k + 0.5 * alpha * v0 - (p - 1) / (2 * (p + 1)) * lp,
        vertex_abs2=v0,
        kinetic=k,
        lp_pow=lp,
    )


def line_action_delta(field, alpha, omega, p, n_edges, rule="trapezoid"):
    """Action of an even line function with the point term ``(alpha/N)|v(0)|^2``.

    For the half-soliton this is the radial line problem whose level times
    ``N/2`` equals the ground-state level on the graph.
    """
    k = kinetic(field, rule)
    m = mass(field, rule)
    lp = lp_norm_pow(field, p + 1, rule)
    v0 = abs(field.right[0]) ** 2
    return 0.5 * k + 0.5 * omega * m - lp / (p + 1) + alpha / n_edges * v0


# closed forms -------------------------------------------------------------


def vertex_value_sq_closed(params):
    """``|phi(0)|^2 = [((p+1) omega/2)(1 - xi^2)]^(2/(p-1))`` for ``Phi_0``."""
    p = params.p
    return ((p + 1) * params.omega / 2 * (1 - params.xi**2)) ** (2.0 / (p - 1))


def profile_lp_norm_closed(params, tol=1e-13):
    """``||Phi_0||_{p+1}^{p+1}`` from the tail integral over ``[xi, 1]``."""
    p, w, n = params.p, params.omega, params.n_edges
    pref = 2.0 * n / ((p - 1) * math.sqrt(w)) * ((p + 1) * w / 2) ** ((p + 1) / (p - 1))
    return pref * tail_integral(params.xi, p, tol)


def profile_mass_closed(params, tol=1e-13):
    """``||Phi_0||_2^2``, integrated in the sech variable ``y = rate*x + a_0``."""
    p, w, n = params.p, params.omega, params.n_edges
    q = 4.0 / (p - 1)
    y0 = math.atanh(params.xi)

    def integrand(y):
        return math.exp(q * float(log_sech(y)))

    val = adaptive_simpson(integrand, y0, y0 + 60.0 / q, tol=tol)
    return 2.0 * n / ((p - 1) * math.sqrt(w)) * ((p + 1) * w / 2) ** (2.0 / (p - 1)) * val


def dc_ground_level(params, tol=1e-13):
    """Ground-state action level ``d_eq(omega) = S_omega(Phi_0) = (p-1)/(2(p+1)) ||Phi_0||_{p+1}^{p+1}``."""
    if params.k != 0:
        raise ValueError("the ground-state level is defined through Phi_0 (k = 0)")
    p = params.p
    return (p - 1) / (2 * (p + 1)) * profile_lp_norm_closed(params, tol)


# thresholds ---------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdResult:
    p: float
    xi: float
    omega_star: float
    residual: float
    mode: str
    sign_changes: int


def threshold_function(xi, p, tol=1e-13):
    """``f(xi) = (p-5)/2 * int_xi^1 (1-s^2)^(2/(p-1)) ds - xi (1-xi^2)^(2/(p-1))``."""
    q = 2.0 / (p - 1)
    return 0.5 * (p - 5) * tail_integral(xi, p, tol) - xi * (1 - xi * xi) ** q


def _threshold_derivative(xi, p):
    q = 2.0 / (p - 1)
    w = 1 - xi * xi
    return 0.5 * (p - 5) * tail_integral_derivative(xi, p) - w**q + 2 * q * xi * xi * w ** (q - 1)


def _solve_xi(p, scan_points=1000):
    if not p > 5:
        raise ValueError(f"the threshold equation has a root in (0,1) only for p > 5, got p={p}")
    grid = np.linspace(0.0, 1.0, scan_points + 1)[1:-1]
    vals = np.array([threshold_function(x, p) for x in grid])
    signs = np.sign(vals)
    changes = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
    if len(changes) == 0:
        raise ValueError(f"no sign change of the threshold function found for p={p}")
    i = changes[0]
    xi = bisect(lambda x: threshold_function(x, p), grid[i], grid[i + 1], xtol=1e-15)
    # one Newton polish, kept if it improves the residual
    d = _threshold_derivative(xi, p)
    if d != 0.0:
        cand = xi - threshold_function(xi, p) / d
        if grid[i] <= cand <= grid[i + 1] and abs(threshold_function(cand, p)) < abs(threshold_function(xi, p)):
            xi = cand
    return xi, len(changes)


def instability_threshold(p, alpha=None, n_edges=None, gamma=None):
    """Root ``xi`` of the threshold equation and the frequency threshold.

    Pass ``alpha`` and ``n_edges`` for the star graph (``omega_1 = alpha^2/(N^2 xi^2)``)
    or ``gamma`` for the delta-prime line (``omega_3 = 4/(gamma^2 xi^2)``).
    """
    xi, changes = _solve_xi(p)
    if gamma is not None:
        omega_star, mode = 4.0 / (gamma**2 * xi**2), "delta_prime"
    elif alpha is not None and n_edges is not None:
        omega_star, mode = alpha**2 / (n_edges**2 * xi**2), "delta_graph"
    else:
        omega_star, mode = float("nan"), "xi_only"
    return ThresholdResult(p, xi, omega_star, abs(threshold_function(xi, p)), mode, changes)


@dataclass(frozen=True)
class SecondVariation:
    """``d^2/dlambda^2 E(Phi^lambda)`` at ``lambda = 1`` from sampled norms and in closed form."""

    sampled: float
    closed_form: float
    f_xi: float

    @property
    def discrepancy(self):
        return abs(self.sampled - self.closed_form)

    @property
    def signs_agree(self):
        return np.sign(self.sampled) == np.sign(self.closed_form)


def second_variation_E(params, grid=None, on_coarse="warn"):
    """Second derivative of ``lambda -> E(Phi^lambda)`` at 1 for ``Phi_0``.

    The closed form uses ``P(Phi) = 0`` to write it as
    ``-alpha/2 |phi(0)|^2 + beta(2-beta)/(p+1) ||Phi||_{p+1}^{p+1}`` with
    ``beta = (p-1)/2``; for ``alpha < 0`` its sign is ``-sign(f(xi))``. When a
    grid is given, the sampled value ``||Phi'||^2 - (p-1)(p-3)/(4(p+1)) ||Phi||^{p+1}``
    is computed as well (otherwise it is NaN).
    """
    p, alpha = params.p, params.alpha
    beta = (p - 1) / 2
    lp = profile_lp_norm_closed(params)
    closed = -0.5 * alpha * vertex_value_sq_closed(params) + beta * (2 - beta) / (p + 1) * lp
    sampled = float("nan")
    if grid is not None:
        phi = build_profile_delta(params, grid, on_coarse=on_coarse)
        sampled = kinetic(phi) - (p - 1) * (p - 3) / (4 * (p + 1)) * lp_norm_pow(phi, p + 1)
    f_xi = threshold_function(params.xi, p) if -1 < params.xi < 1 else float("nan")
    return SecondVariation(sampled, closed, f_xi)


def lambda_one(field, alpha, omega, p, rtol=1e-8):
    """The multiplier ``lambda_1`` with ``I_omega(lambda_1 V) = 0``."""
    k, m, lp, v0 = _parts(field, p, "trapezoid")
    if not lp > 0:
        raise ValueError("lambda_1 needs a nonzero field")
    num = k + omega * m + alpha * v0
    if not num > 0:
        raise ValueError(f"lambda_1 needs ||V'||^2 + omega||V||^2 + alpha|v(0)|^2 > 0, got {num:.3e}")
    lam = (num / lp) ** (1.0 / (p - 1))
    check = nehari_delta(lam * field, alpha, omega, p)
    scale = lam**2 * num
    if abs(check) > rtol * scale:
        raise ArithmeticError(f"I_omega(lambda_1 V) = {check:.3e} exceeds {rtol:g} relative")
    return lam


def lambda_zero(field, reference, p, rtol=1e-6, check=True):
    """Dilation ``lambda_0 = (||Phi||^{p+1} / ||V||^{p+1})^(2/(p-1))`` matching the ``L^{p+1}`` norms.

    Requires ``||V||_{p+1} >= ||Phi||_{p+1}`` (equality allowed up to ``rtol``).
    With ``check`` the dilated field is built with :func:`scale_field` and its
    norm compared to the reference.
    """
    lp_v = lp_norm_pow(field, p + 1)
    lp_ref = lp_norm_pow(reference, p + 1)
    if lp_v < lp_ref * (1 - rtol):
        raise ValueError(
            f"lambda_0 needs ||V||_(p+1) >= ||Phi||_(p+1); got {lp_v:.6g} < {lp_ref:.6g} (powers p+1)"
        )
    lam = (lp_ref / lp_v) ** (2.0 / (p - 1))
    if check:
        got = lp_norm_pow(scale_field(field, lam), p + 1)
        if abs(got - lp_ref) > rtol * lp_ref:
            raise ArithmeticError(f"||V^lambda_0||^(p+1) = {got:.10g} vs {lp_ref:.10g}")
    return lam


# inequality used for the alpha < 0 blow-up lemma ---------------------------


def _binom_series_ratio(beta, delta, terms=60):
    # N(1+delta)/delta^2 with N(l) = 2 l^beta - beta l^2 - 2 + beta
    c = beta * (beta - 1) / 2  # C(beta, 2)
    total = 2 * c - beta
    coef = c
    power = 1.0
    for k in range(3, terms + 3):
        coef *= (beta - k + 1) / k
        power *= delta
        term = 2 * coef * power
        total += term
        if abs(term) < 1e-18 * max(1.0, abs(total)):
            break
    return total


def g_inequality(lam, p):
    """``g(lam) = beta(lam^2 + (beta-3) lam^beta)/(lam(2-lam)) - (2 lam^beta - beta lam^2 - 2 + beta)/(lam-1)^2``.

    The second quotient is summed as a binomial series for ``|lam - 1| < 0.25``
    to avoid cancellation; ``g(1) = 0``.
    """
    beta = (p - 1) / 2
    lam = np.asarray(lam, dtype=float)
    first = beta * (lam**2 + (beta - 3) * lam**beta) / (lam * (2 - lam))
    second = np.empty_like(lam)
    near = np.abs(lam - 1) < 0.25
    far = ~near
    lf = lam[far]
    second[far] = (2 * lf**beta - beta * lf**2 - 2 + beta) / (lf - 1) ** 2
    second[near] = [_binom_series_ratio(beta, d) for d in (lam[near] - 1)]
    out = first - second
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GInequalityReport:
    p: float
    max_g: float
    argmax: float
    n_points: int
    tolerance: float

    @property
    def holds(self):
        return self.max_g <= self.tolerance


def g_inequality_check(p, n_points=10_000, margin=1e-6, tolerance=1e-12):
    """Sample ``g`` on ``n_points`` points of ``[margin, 1 - margin]`` and report its maximum."""
    if not p > 5:
        raise ValueError(f"the inequality is used for p > 5, got {p}")
    lam = np.linspace(margin, 1 - margin, n_points)
    g = g_inequality(lam, p)
    i = int(np.argmax(g))
    return GInequalityReport(p, float(g[i]), float(lam[i]), n_points, tolerance)


# delta-prime --------------------------------------------------------------


def delta_prime_functionals(field, gamma, omega, p, rule="trapezoid"):
    """``(E_gamma, S_{omega,gamma}, I_{omega,gamma}, P_gamma)`` of a line field."""
    k = kinetic(field, rule)
    m = mass(field, rule)
    lp = lp_norm_pow(field, p + 1, rule)
    j2 = field.vertex_abs2
    energy = 0.5 * k - j2 / (2 * gamma) - lp / (p + 1)
    return FunctionalReport(
        mass=m,
        energy=energy,
        action=energy + 0.5 * omega * m,
        nehari=k + omega * m - lp - j2 / gamma,
        virial_p=k - j2 / (2 * gamma) - (p - 1) / (2 * (p + 1)) * lp,
        vertex_abs2=j2,
        kinetic=k,
        lp_pow=lp,
    )


def delta_prime_jump_sq_closed(params):
    """``|phi(0+) - phi(0-)|^2`` for either branch."""
    p, w = params.p, params.omega
    base = ((p + 1) * w / 2) ** (2 / (p - 1))
    if params.branch is Branch.ODD:
        z = 2 / (params.gamma * math.sqrt(w))
        return 4 * base * (1 - z * z) ** (2 / (p - 1))
    a = (1 - params.t1**2) ** (1 / (p - 1))
    b = (params.e2 * (2 - params.e2)) ** (1 / (p - 1))
    return base * (a + b) ** 2


def delta_prime_lp_norm_closed(params):
    """``||phi||_{p+1}^{p+1}`` for either branch."""
    p, w = params.p, params.omega
    pref = 2 / ((p - 1) * math.sqrt(w)) * ((p + 1) * w / 2) ** ((p + 1) / (p - 1))
    if params.branch is Branch.ODD:
        z = 2 / (params.gamma * math.sqrt(w))
        return 2 * pref * tail_integral(z, p)
    return pref * (tail_integral(params.t1, p) + _tail_near_one(params.e2, p))


def _tail_near_one(e, p):
    if e < 1e-15:
        # int_{1-e}^1 (1-s^2)^q ds ~ (2e)^q e / (q+1)
        q = 2 / (p - 1)
        return (2 * e) ** q * e / (q + 1)
    return tail_integral(1 - e, p)


def delta_prime_instability_condition(params):
    """Left side of the sign condition for the asymmetric wave; positive means ``d^2 E_gamma <= 0``."""
    if params.branch is Branch.ODD:
        raise ValueError("the condition is stated for the asymmetric branches")
    p, w = params.p, params.omega
    beta = (p - 1) / 2
    ints = tail_integral(params.t1, p) + _tail_near_one(params.e2, p)
    a = (1 - params.t1**2) ** (1 / (p - 1))
    b = (params.e2 * (2 - params.e2)) ** (1 / (p - 1))
    return 0.5 * (p - 5) * ints - (a + b) ** 2 / (beta * math.sqrt(w))


def estimate_omega2(gamma, p, omega_max=1e8, n_scan=200):
    """Empirical frequency above which the asymmetric sign condition stays positive.

    Scans ``omega`` log-uniformly from just above the existence threshold to
    ``omega_max``, takes the last sign change and refines it by bisection.
    Returns ``(omega2, scan)`` where ``scan`` is a list of ``(omega, value)``.
    This is an estimate, not the sharp constant.
    """
    thr = asymmetric_threshold(gamma, p)

    def cond(w):
        return delta_prime_instability_condition(DeltaPrimeParams(gamma, w, p, Branch.ASYMMETRIC))

    omegas = np.geomspace(thr * (1 + 1e-6), omega_max, n_scan)
    vals = [cond(w) for w in omegas]
    if vals[-1] <= 0:
        raise ValueError(f"condition not positive at omega={omega_max:g}; raise omega_max")
    last_neg = max((i for i, v in enumerate(vals) if v <= 0), default=None)
    if last_neg is None:
        return float(omegas[0]), list(zip(omegas, vals))
    w2 = bisect(cond, omegas[last_neg], omegas[last_neg + 1], xtol=1e-12 * omegas[last_neg])
    return w2, list(zip(omegas, vals))
