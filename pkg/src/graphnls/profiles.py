"""Closed-form standing waves for the delta star graph and the delta-prime line."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import GraphField, LineField, derivative, signed_derivative_line

__all__ = [
    "WaveParams",
    "DeltaPrimeParams",
    "Branch",
    "CoarseGridError",
    "log_sech",
    "delta_profile_values",
    "build_profile_delta",
    "build_half_soliton",
    "solve_t1_t2",
    "build_profile_delta_prime",
    "scale_field",
    "check_resolution",
    "default_length",
    "stationary_residual_delta",
    "stationary_residual_delta_prime",
]


class CoarseGridError(ValueError):
    """The grid does not resolve the profile (spacing or truncation)."""


def log_sech(z):
    """``log(sech z)`` without overflow."""
    a = np.abs(z)
    return -a + math.log(2.0) - np.log1p(np.exp(-2.0 * a))


def _sech_pow(z, q):
    return np.exp(q * log_sech(z))


def _atanh_one_minus(e):
    """``atanh(1 - e)`` accurate for tiny ``e``."""
    return 0.5 * math.log((2.0 - e) / e)


@dataclass(frozen=True)
class WaveParams:
    """Parameters of the star-graph profile ``Phi_k`` (edges counted from 1 in the formulas, from 0 here)."""

    n_edges: int
    alpha: float
    omega: float
    p: float
    k: int = 0

    def __post_init__(self):
        if int(self.n_edges) != self.n_edges or self.n_edges < 2:
            raise ValueError(f"n_edges must be an integer >= 2, got {self.n_edges}")
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        kmax = (self.n_edges - 1) // 2
        if int(self.k) != self.k or not 0 <= self.k <= kmax:
            raise ValueError(f"k must be an integer in [0, {kmax}], got {self.k}")
        object.__setattr__(self, "n_edges", int(self.n_edges))
        object.__setattr__(self, "k", int(self.k))
        m = self.n_edges - 2 * self.k
        if not self.omega > self.alpha**2 / m**2:
            raise ValueError(
                f"existence requires omega > alpha^2/(N-2k)^2 = {self.alpha**2 / m**2:.6g}, got omega={self.omega}"
            )

    @property
    def a_k(self):
        return math.atanh(self.alpha / ((2 * self.k - self.n_edges) * math.sqrt(self.omega)))

    @property
    def xi(self):
        """``-alpha / (N sqrt(omega))``; equals ``tanh(a_0)``."""
        return -self.alpha / (self.n_edges * math.sqrt(self.omega))

    @property
    def amplitude(self):
        return ((self.p + 1) * self.omega / 2) ** (1.0 / (self.p - 1))

    @property
    def rate(self):
        """Coefficient of ``x`` inside the sech."""
        return (self.p - 1) * math.sqrt(self.omega) / 2

    def with_omega(self, omega):
        return WaveParams(self.n_edges, self.alpha, omega, self.p, self.k)


def delta_profile_values(params, x):
    """Samples of ``Phi_k`` on every edge at the points ``x >= 0``; shape ``(N, len(x))``."""
    x = np.asarray(x, dtype=float)
    q = 2.0 / (params.p - 1)
    c, a = params.rate, params.a_k
    out = np.empty((params.n_edges, x.size))
    out[: params.k] = params.amplitude * _sech_pow(c * x - a, q)
    out[params.k :] = params.amplitude * _sech_pow(c * x + a, q)
    return out


def default_length(omega, p, floor=40.0):
    """Edge length putting the sech tail far below 1e-14: ``40/sqrt(omega) * 2/(p-1)``, at least ``floor``."""
    return max(floor, 40.0 / math.sqrt(omega) * 2.0 / (p - 1))


def check_resolution(rate, amplitude, q, shift, grid, tail_tol=1e-12):
    """Return a list of problems with resolving ``amplitude * sech^q(rate*x + shift)`` on ``grid``."""
    problems = []
    width = 1.0 / rate
    if grid.h > 0.05 * width:
        problems.append(f"spacing h={grid.h:.3g} exceeds 0.05*width={0.05 * width:.3g}")
    tail = amplitude * math.exp(q * float(log_sech(rate * grid.length + shift)))
    if tail > tail_tol:
        problems.append(f"tail value {tail:.3g} at x=L exceeds {tail_tol:g}")
    return problems


def _handle_resolution(problems, on_coarse):
    if not problems or on_coarse == "ignore":
        return
    msg = "grid too coarse: " + "; ".join(problems)
    if on_coarse == "raise":
        raise CoarseGridError(msg)
    warnings.warn(msg, stacklevel=3)


def build_profile_delta(params, grid, lam=1.0, on_coarse="warn"):
    """Sample ``Phi_k`` on ``grid``; with ``lam != 1`` sample the exact dilation ``lam^(1/2) Phi(lam x)``.

    ``on_coarse`` is one of ``"raise"``, ``"warn"``, ``"ignore"``.
    """
    if grid.n_edges != params.n_edges:
        raise ValueError(f"grid has {grid.n_edges} edges, profile needs {params.n_edges}")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    q = 2.0 / (params.p - 1)
    shift = min(params.a_k, -params.a_k) if params.k else params.a_k
    _handle_resolution(check_resolution(params.rate * lam, params.amplitude, q, shift, grid), on_coarse)
    vals = math.sqrt(lam) * delta_profile_values(params, lam * grid.x)
    return GraphField(grid, vals)


def build_half_soliton(alpha, omega, p, n_edges, grid, on_coarse="warn"):
    """Even line profile ``phi_omega`` whose restriction to each edge is ``Phi_0``."""
    params = WaveParams(n_edges, alpha, omega, p, 0)
    q = 2.0 / (p - 1)
    line_grid = grid.with_edges(2)
    _handle_resolution(check_resolution(params.rate, params.amplitude, q, params.a_k, line_grid), on_coarse)
    z = params.rate * line_grid.x - math.atanh(alpha / (n_edges * math.sqrt(omega)))
    half = params.amplitude * _sech_pow(z, q)
    return LineField(line_grid, half, half)


class Branch(str, Enum):
    ODD = "odd"
    ASYMMETRIC = "asymmetric"
    ASYMMETRIC_SWAPPED = "asymmetric_swapped"


def _g(t, p):
    return t ** (p - 1) * (1.0 - t * t)


def _g_near_one(e, p):
    # g(1 - e) without cancellation
    return (1.0 - e) ** (p - 1) * e * (2.0 - e)


def asymmetric_threshold(gamma, p):
    """Lowest frequency at which the asymmetric delta-prime waves exist."""
    return 4.0 / gamma**2 * (p + 1) / (p - 1)


def _solve_e2(gamma, omega, p):
    """Solve the (t1, t2) system for ``(t1, e2)`` with ``e2 = 1 - t2``.

    Eliminating ``t1 = t2 / (k t2 - 1)`` with ``k = gamma sqrt(omega)`` leaves a
    scalar equation ``F(e2) = g(t1) - g(t2) = 0``. It always has the trivial
    root ``t1 = t2 = 2/k``; the asymmetric root lies in ``0 < e2 < 1 - 2/k``,
    where ``F > 0`` as ``e2 -> 0`` and ``F < 0`` just below the trivial root.
    Bisection runs on ``log(e2)`` so tiny ``1 - t2`` (large omega) stays accurate.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    thr = asymmetric_threshold(gamma, p)
    if not omega > thr * (1 + 1e-12):
        raise ValueError(
            f"asymmetric delta-prime waves need omega > (4/gamma^2)(p+1)/(p-1) = {thr:.12g}; "
            f"at omega={omega} the only solution is the degenerate t1 = t2"
        )
    k = gamma * math.sqrt(omega)
    e_sym = 1.0 - 2.0 / k

    def t1_of(e):
        t2 = 1.0 - e
        return t2 / (k * t2 - 1.0)

    def F(e):
        return _g(t1_of(e), p) - _g_near_one(e, p)

    us = np.concatenate([np.logspace(-300, -1, 300), 1.0 - np.logspace(-1, -13, 121)])
    es = e_sym * us
    vals = np.array([F(e) for e in es])
    bracket = None
    for i in range(len(es) - 1):
        if vals[i] > 0 and vals[i + 1] < 0:
            bracket = (es[i], es[i + 1])
            break
    if bracket is None:
        raise ValueError(f"no asymmetric root bracketed for gamma={gamma}, omega={omega}, p={p}")

    lo, hi = math.log(bracket[0]), math.log(bracket[1])
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if F(math.exp(mid)) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    e = math.exp(0.5 * (lo + hi))

    # one secant/Newton polish, kept only if it helps
    de = e * 1e-7
    slope = (F(e + de) - F(e - de)) / (2 * de)
    if slope != 0.0:
        cand = e - F(e) / slope
        if bracket[0] <= cand <= bracket[1] and abs(F(cand)) < abs(F(e)):
            e = cand
    return t1_of(e), e


def solve_t1_t2(gamma, omega, p):
    """Return ``(t1, t2)`` with ``0 < t1 < t2 < 1`` for the asymmetric delta-prime waves."""
    t1, e2 = _solve_e2(gamma, omega, p)
    return t1, 1.0 - e2


def t1_t2_residuals(gamma, omega, p, t1, e2):
    """Residuals of both equations of the system, using ``e2 = 1 - t2``."""
    t2 = 1.0 - e2
    r1 = _g(t1, p) - _g_near_one(e2, p)
    r2 = 1.0 / t1 + 1.0 / t2 - gamma * math.sqrt(omega)
    return r1, r2


@dataclass(frozen=True)
class DeltaPrimeParams:
    """Parameters of a delta-prime standing wave on the line.

    Derived fields: ``t1``, ``t2`` (asymmetric branches), ``e2 = 1 - t2`` kept
    separately because ``t2`` rounds to 1 at large omega, and the shifts
    ``y0``, ``y1``, ``y2``.
    """

    gamma: float
    omega: float
    p: float
    branch: Branch = Branch.ODD
    t1: float = field(init=False, default=float("nan"))
    t2: float = field(init=False, default=float("nan"))
    e2: float = field(init=False, default=float("nan"))
    y0: float = field(init=False, default=float("nan"))
    y1: float = field(init=False, default=float("nan"))
    y2: float = field(init=False, default=float("nan"))

    def __post_init__(self):
        object.__setattr__(self, "branch", Branch(self.branch))
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        c = self.rate
        if self.branch is Branch.ODD:
            if not self.omega > 4.0 / self.gamma**2:
                raise ValueError(f"odd branch needs omega > 4/gamma^2 = {4 / self.gamma**2:.6g}, got {self.omega}")
            object.__setattr__(self, "y0", math.atanh(2.0 / (self.gamma * math.sqrt(self.omega))) / c)
        else:
            t1, e2 = _solve_e2(self.gamma, self.omega, self.p)
            object.__setattr__(self, "t1", t1)
            object.__setattr__(self, "e2", e2)
            object.__setattr__(self, "t2", 1.0 - e2)
            object.__setattr__(self, "y1", math.atanh(t1) / c)
            object.__setattr__(self, "y2", _atanh_one_minus(e2) / c)

    @property
    def amplitude(self):
        return ((self.p + 1) * self.omega / 2) ** (1.0 / (self.p - 1))

    @property
    def rate(self):
        return (self.p - 1) * math.sqrt(self.omega) / 2

    def with_omega(self, omega):
        return DeltaPrimeParams(self.gamma, omega, self.p, self.branch)

    def half_shifts(self):
        """Shifts ``(right, left, left_sign)`` so that each half is ``sign * A sech^q(c(|x| + shift))``."""
        if self.branch is Branch.ODD:
            return self.y0, self.y0, -1.0
        if self.branch is Branch.ASYMMETRIC:
            return self.y1, self.y2, -1.0
        return self.y2, self.y1, -1.0


def build_profile_delta_prime(params, grid, lam=1.0, on_coarse="warn"):
    """Sample the odd or asymmetric delta-prime profile on a two-edge grid.

    ``lam != 1`` samples the exact dilation ``lam^(1/2) phi(lam x)``.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    line_grid = grid.with_edges(2)
    q = 2.0 / (params.p - 1)
    c, amp = params.rate, params.amplitude
    right_shift, left_shift, left_sign = params.half_shifts()
    _handle_resolution(
        check_resolution(c * lam, amp, q, c * min(right_shift, left_shift), line_grid), on_coarse
    )
    s = lam * line_grid.x
    right = amp * _sech_pow(c * (s + right_shift), q)
    left = left_sign * amp * _sech_pow(c * (s + left_shift), q)
    return LineField(line_grid, math.sqrt(lam) * left, math.sqrt(lam) * right)


def _rescale_rows(rows, x, lam):
    out = np.zeros_like(rows)
    xs = lam * x
    inside = xs <= x[-1]
    for i, r in enumerate(rows):
        re = CubicSpline(x, r.real, bc_type="natural")(xs[inside])
        im = CubicSpline(x, r.imag, bc_type="natural")(xs[inside]) if np.any(r.imag) else 0.0
        out[i, inside] = re + 1j * im
    return math.sqrt(lam) * out


def scale_field(field, lam):
    """Mass-preserving dilation ``V^lam(x) = lam^(1/2) V(lam x)`` on the same grid.

    Each edge (or half-line) is resampled with a natural cubic spline; points
    with ``lam * x > L`` are set to zero.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if lam == 1.0:
        return field
    rows = _rescale_rows(field.edges, field.grid.x, lam)
    return field.replace(rows)


def _second_difference(rows, h):
    return (rows[:, 2:] - 2.0 * rows[:, 1:-1] + rows[:, :-2]) / h**2


def stationary_residual_delta(field, alpha, omega, p):
    """Residuals of the stationary problem for a sampled star-graph profile.

    Returns a dict with the interior sup-residual of ``-u'' + omega u - |u|^(p-1) u``,
    the vertex continuity spread and the flux residual ``sum_j u_j'(0) - alpha u(0)``.
    """
    u = field.values
    h = field.grid.h
    interior = -_second_difference(u, h) + omega * u[:, 1:-1] - np.abs(u[:, 1:-1]) ** (p - 1) * u[:, 1:-1]
    du = derivative(field).values
    flux = np.sum(du[:, 0]) - alpha * u[0, 0]
    continuity = float(np.max(np.abs(u[:, 0] - u[0, 0])))
    return {
        "interior": float(np.max(np.abs(interior))),
        "continuity": continuity,
        "flux": float(abs(flux)),
    }


def stationary_residual_delta_prime(field, gamma, omega, p):
    """Residuals for a sampled delta-prime profile: interior equation, derivative continuity, jump condition."""
    h = field.grid.h
    u = field.edges
    interior = -_second_difference(u, h) + omega * u[:, 1:-1] - np.abs(u[:, 1:-1]) ** (p - 1) * u[:, 1:-1]
    d = signed_derivative_line(field)
    dl, dr = d.left[0], d.right[0]
    mean_d = 0.5 * (dl + dr)
    return {
        "interior": float(np.max(np.abs(interior))),
        "derivative_continuity": float(abs(dr - dl)),
        "jump": float(abs(field.jump + gamma * mean_d)),
    }
