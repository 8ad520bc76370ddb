import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from graphnls.functionals import action_delta
from graphnls.grid import StarGraphGrid, lp_norm_pow
from graphnls.profiles import (
    Branch,
    CoarseGridError,
    DeltaPrimeParams,
    WaveParams,
    asymmetric_threshold,
    build_half_soliton,
    build_profile_delta,
    build_profile_delta_prime,
    log_sech,
    scale_field,
    solve_t1_t2,
    stationary_residual_delta,
    stationary_residual_delta_prime,
    t1_t2_residuals,
)


def grid3(h=0.01, L=40.0, n=3):
    return StarGraphGrid.from_spacing(n, L, h)


def test_log_sech_large_argument():
    assert log_sech(np.array([800.0]))[0] == pytest.approx(-800 + math.log(2), rel=1e-15)
    assert log_sech(np.array([0.0]))[0] == 0.0


def test_alpha_zero_vertex_value():
    phi = build_profile_delta(WaveParams(3, 0.0, 1.0, 3.0), grid3())
    assert np.allclose(phi.values[:, 0], math.sqrt(2), atol=1e-15)


def test_attractive_vertex_value():
    phi = build_profile_delta(WaveParams(3, -1.0, 1.0, 3.0), grid3())
    assert phi.vertex == pytest.approx(4.0 / 3.0, abs=1e-14)


@pytest.mark.parametrize("args", [(3, -1.0, 0.1, 3.0, 0), (3, 1.0, 0.5, 3.0, 1), (2, 0.0, 1.0, 3.0, 1),
                                  (1, 0.0, 1.0, 3.0, 0), (3, 0.0, 1.0, 1.0, 0)])
def test_wave_params_rejects(args):
    with pytest.raises(ValueError):
        WaveParams(*args)


def test_xi_is_tanh_of_shift():
    prm = WaveParams(4, -1.3, 2.0, 5.0)
    assert prm.xi == pytest.approx(math.tanh(prm.a_k), rel=1e-15)


def test_k_branch_edges():
    prm = WaveParams(5, 1.0, 1.0, 6.0, k=1)
    phi = build_profile_delta(prm, grid3(n=5, h=0.002, L=30))
    # for alpha > 0 the first k edges decay from the vertex, the others have a hump inside
    assert np.argmax(phi.values[0].real) == 0
    assert np.allclose(phi.values[1], phi.values[4])
    assert np.argmax(phi.values[1].real) > 0


def test_coarse_grid_rejected():
    prm = WaveParams(3, -1.0, 2.0, 3.0)
    g = StarGraphGrid(3, 40.0, 50)
    with pytest.raises(CoarseGridError):
        build_profile_delta(prm, g, on_coarse="raise")
    with pytest.warns(UserWarning, match="coarse"):
        build_profile_delta(prm, g)


def test_residuals_second_order():
    prm = WaveParams(3, -1.0, 2.0, 6.0)
    res = [stationary_residual_delta(build_profile_delta(prm, grid3(h)), -1.0, 2.0, 6.0) for h in (0.004, 0.002)]
    for key in ("interior", "flux"):
        assert 3.5 < res[0][key] / res[1][key] < 4.5
    assert res[1]["continuity"] == 0.0


def test_half_soliton_matches_graph_profile():
    g = grid3(0.01, 30.0)
    half = build_half_soliton(-1.0, 2.0, 4.0, 3, g)
    phi = build_profile_delta(WaveParams(3, -1.0, 2.0, 4.0), g)
    assert np.max(np.abs(half.right - phi.values[0])) < 1e-14
    assert np.array_equal(half.left, half.right)


def test_half_soliton_free_case():
    g = grid3(0.01, 30.0)
    half = build_half_soliton(0.0, 1.0, 3.0, 3, g)
    assert np.allclose(half.right, math.sqrt(2) / np.cosh(g.x), atol=1e-14)
    with pytest.raises(ValueError):
        build_half_soliton(-3.0, 1.0, 3.0, 3, g)


def test_ground_state_below_excited():
    g = grid3(0.005, 40.0, n=5)
    s0, s1, s2 = (action_delta(build_profile_delta(WaveParams(5, -1.0, 2.0, 3.0, k), g), -1.0, 2.0, 3.0)
                  for k in (0, 1, 2))
    assert s0 < s1 < s2


# delta-prime ---------------------------------------------------------------


def test_t1_t2_against_oracle(oracle_values):
    for row in oracle_values["t1t2"]:
        g, w, p = float(row["gamma"]), float(row["omega"]), float(row["p"])
        t1, t2 = solve_t1_t2(g, w, p)
        assert t1 == pytest.approx(float(row["t1"]), rel=1e-12)
        prm = DeltaPrimeParams(g, w, p, Branch.ASYMMETRIC)
        assert prm.e2 == pytest.approx(float(row["one_minus_t2"]), rel=1e-9)
        r1, r2 = t1_t2_residuals(g, w, p, prm.t1, prm.e2)
        assert abs(r1) < 1e-12 and abs(r2) < 1e-12
        assert 0 < t1 < math.sqrt((p - 1) / (p + 1)) < t2 < 1


@given(st.floats(0.5, 4.0), st.floats(1.05, 50.0), st.floats(2.0, 10.0))
def test_t1_t2_residuals_property(gamma, factor, p):
    w = factor * asymmetric_threshold(gamma, p)
    prm = DeltaPrimeParams(gamma, w, p, Branch.ASYMMETRIC)
    r1, r2 = t1_t2_residuals(gamma, w, p, prm.t1, prm.e2)
    assert abs(r1) < 1e-12
    assert abs(r2) < 1e-12 * gamma * math.sqrt(w)
    assert prm.t1 < prm.t2


def test_t1_t2_large_omega():
    errs = []
    for w in (1e4, 1e6):
        prm = DeltaPrimeParams(2.0, w, 6.0, Branch.ASYMMETRIC)
        e1 = abs(prm.t1 * 2 * math.sqrt(w) - 1)
        e2 = abs(prm.e2 * 2 * 2**5 * w**2.5 - 1)
        errs.append((e1, e2))
    assert errs[0][0] < 0.05 and errs[0][1] < 0.05
    assert errs[1][0] < errs[0][0] and errs[1][1] < errs[0][1]


def test_asymmetric_threshold_rejected():
    w = asymmetric_threshold(2.0, 6.0)
    with pytest.raises(ValueError):
        DeltaPrimeParams(2.0, w, 6.0, Branch.ASYMMETRIC)
    with pytest.raises(ValueError):
        DeltaPrimeParams(2.0, 0.9, 6.0, Branch.ODD)


def test_odd_profile_antisymmetric_and_jump():
    prm = DeltaPrimeParams(2.0, 5.0, 6.0)
    phi = build_profile_delta_prime(prm, grid3(0.005, 20.0, n=2))
    assert np.max(np.abs(phi.left + phi.right)) < 1e-14
    z = 2 / (2.0 * math.sqrt(5.0))
    expected = 4 * ((7 * 5.0 / 2) * (1 - z * z)) ** (2 / 5)
    assert phi.vertex_abs2 == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("branch", list(Branch))
def test_delta_prime_residuals(branch):
    prm = DeltaPrimeParams(2.0, 5.0, 6.0, branch)
    res = [stationary_residual_delta_prime(build_profile_delta_prime(prm, grid3(h, 15.0, n=2)), 2.0, 5.0, 6.0)
           for h in (0.002, 0.001)]
    for key in ("interior", "derivative_continuity", "jump"):
        assert res[1][key] < 1e-3
        if res[1][key] > 1e-12:
            assert 3.5 < res[0][key] / res[1][key] < 4.5


def test_swapped_branch_is_reflection():
    g = grid3(0.01, 15.0, n=2)
    a = build_profile_delta_prime(DeltaPrimeParams(2.0, 5.0, 6.0, Branch.ASYMMETRIC), g)
    b = build_profile_delta_prime(DeltaPrimeParams(2.0, 5.0, 6.0, Branch.ASYMMETRIC_SWAPPED), g)
    assert np.allclose(a.right, -b.left, atol=1e-15)
    assert np.allclose(a.left, -b.right, atol=1e-15)


# scaling ---------------------------------------------------------------------


def test_scale_identity():
    phi = build_profile_delta(WaveParams(3, -1.0, 2.0, 3.0), grid3())
    assert scale_field(phi, 1.0) is phi
    with pytest.raises(ValueError):
        scale_field(phi, 0.0)


@pytest.mark.parametrize("lam", [0.8, 1.2, 2.0])
def test_scale_norm_laws(lam):
    p = 5.0
    prm = WaveParams(3, 0.0, 1.0, p)
    g = grid3(0.002, 40.0)
    phi = build_profile_delta(prm, g)
    v = scale_field(phi, lam)
    m0 = lp_norm_pow(phi, 2, "simpson")
    assert lp_norm_pow(v, 2, "simpson") == pytest.approx(m0, rel=1e-8)
    lp0 = lp_norm_pow(phi, p + 1, "simpson")
    assert lp_norm_pow(v, p + 1, "simpson") == pytest.approx(lam ** ((p - 1) / 2) * lp0, rel=1e-7)


def test_scale_matches_exact_dilation():
    prm = WaveParams(3, -1.0, 2.0, 3.0)
    g = grid3(0.005, 40.0)
    exact = build_profile_delta(prm, g, lam=1.3)
    spline = scale_field(build_profile_delta(prm, g), 1.3)
    # natural end conditions cost O(h^2) next to the vertex
    assert np.max(np.abs(exact.values - spline.values)) < 5e-6


def test_scale_composition():
    prm = WaveParams(3, 0.0, 1.0, 3.0)
    g = grid3(0.005, 40.0)
    phi = build_profile_delta(prm, g)
    two_step = scale_field(scale_field(phi, 1.1), 1.2)
    one_step = scale_field(phi, 1.1 * 1.2)
    assert np.max(np.abs(two_step.values - one_step.values)) < 1e-6
