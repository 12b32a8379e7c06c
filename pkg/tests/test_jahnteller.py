import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jtphase.functionals import integrated_phase
from jtphase.jahnteller import (
    JTParams,
    build_doublet,
    cycle_trajectory,
    delta_k_jt,
    delta_k_jt_split,
    guessed_exponent,
    guessed_operator,
    mean_phase_closed_form,
    mean_phase_quadrature,
    operator_sign,
    radial_profiles,
    sweep_phase,
)
from jtphase.numerics import RadialGrid, integrate_radial

from oracles import DENSITY_INTEGRAL_K1, JT_PHASE, expm_taylor, jt_delta_k_exact, jt_phase_bruteforce


@pytest.mark.parametrize("k", sorted(JT_PHASE))
def test_mean_phase_frozen(k):
    assert mean_phase_quadrature(k) == pytest.approx(JT_PHASE[k], abs=1e-12)
    assert mean_phase_closed_form(k) == pytest.approx(JT_PHASE[k], abs=1e-13)


@pytest.mark.parametrize("k", [0.3, 1.0, 2.5])
def test_mean_phase_bruteforce(k):
    assert mean_phase_quadrature(k) == pytest.approx(jt_phase_bruteforce(k), abs=1e-9)


def test_mean_phase_limits():
    assert mean_phase_quadrature(0.0) == 0.0
    assert mean_phase_closed_form(0.0) == 0.0
    assert mean_phase_closed_form(50.0) == pytest.approx(math.pi, abs=1e-15)
    assert mean_phase_quadrature(50.0) == pytest.approx(math.pi, abs=1e-12)


def test_mean_phase_branch_sign():
    assert mean_phase_quadrature(1.0, branch="plus") == -mean_phase_quadrature(1.0)
    with pytest.raises(ValueError):
        mean_phase_quadrature(1.0, branch="up")


def test_truncation_guard():
    with pytest.raises(ValueError, match="radial truncation unsafe"):
        mean_phase_quadrature(JTParams(3.0), RadialGrid(8.0, 400))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 8.0))
def test_quadrature_matches_closed_form(k):
    assert abs(mean_phase_quadrature(k) - mean_phase_closed_form(k)) <= 1e-10


def test_closed_form_monotone():
    ks = np.linspace(0, 4, 161)
    vals = np.array([mean_phase_closed_form(k) for k in ks])
    assert np.all(np.diff(vals) > 0)
    assert np.all(vals < math.pi)


def test_operator_sign_and_matrix_exponential():
    assert operator_sign() == 1
    for q, phi, k in [(0.0, 0.0, 0.0), (1.2, 0.4, 0.9), (3.0, 2.5, 2.0), (0.5, -1.0, 1.5)]:
        ref = expm_taylor(guessed_exponent(q, phi, k))
        assert np.allclose(guessed_operator(q, phi, k), ref, rtol=1e-12, atol=1e-14)


def test_guessed_operator_k0_is_scalar():
    out = guessed_operator(1.5, 0.3, 0.0)
    assert np.allclose(out, math.exp(-1.125) * np.eye(2), atol=1e-16)
    with pytest.raises(ValueError):
        guessed_operator(-1.0, 0.0, 1.0)


def test_radial_profiles_no_overflow():
    q = np.linspace(0, 60, 50)
    c, s = radial_profiles(q, 40.0)
    assert np.all(np.isfinite(c)) and np.all(np.isfinite(s))
    c1, s1 = radial_profiles(np.array([1.3]), 0.7)
    f = math.exp(-0.49 - 0.845)
    assert c1[0] == pytest.approx(f * math.cosh(0.91), rel=1e-14)
    assert s1[0] == pytest.approx(f * math.sinh(0.91), rel=1e-14)


def test_doublet_density_and_conjugation():
    p = JTParams(1.0)
    grid = RadialGrid.for_coupling(1.0)
    minus, plus = build_doublet(p, grid, 0.7)
    q = grid.nodes
    expected = np.exp(-2.0 - q * q) * np.cosh(2 * q)
    assert np.allclose(minus.density(), expected, rtol=1e-13, atol=1e-300)
    assert np.array_equal(plus.values, minus.values.conj())
    assert integrate_radial(q * minus.density(), grid) == pytest.approx(DENSITY_INTEGRAL_K1, rel=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(-math.pi, math.pi))
def test_doublet_norm_independent_of_phi(k, phi):
    grid = RadialGrid.for_coupling(k)
    a, _ = build_doublet(JTParams(k), grid, 0.0)
    b, _ = build_doublet(JTParams(k), grid, phi)
    assert b.norm() == pytest.approx(a.norm(), rel=1e-12)


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0])
def test_delta_k_matches_hand_derivation(k):
    # the full spinor delta K is not zero; it equals the integral worked out by hand
    exact = jt_delta_k_exact(k)
    errs = [abs(delta_k_jt(JTParams(k), RadialGrid.for_coupling(k, n), 0.3) / exact - 1.0)
            for n in (800, 1600)]
    assert errs[1] <= 1e-4
    assert 3.5 <= errs[0] / errs[1] <= 4.5


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0, 3.0])
def test_delta_k_phase_gradient_part_vanishes(k):
    grid = RadialGrid.for_coupling(k)
    phase_part, rest = delta_k_jt_split(JTParams(k), grid, 2.1)
    assert abs(phase_part) <= 1e-20
    assert rest > 0


def test_delta_k_same_for_both_branches():
    p, grid = JTParams(1.0), RadialGrid.for_coupling(1.0)
    assert delta_k_jt(p, grid, 0.3, "plus") == pytest.approx(delta_k_jt(p, grid, 0.3, "minus"), rel=1e-14)


def test_sweep_columns_and_threads():
    a = sweep_phase(0.0, 4.0, 81, threads=1)
    b = sweep_phase(0.0, 4.0, 81, threads=4)
    assert np.array_equal(a.phase_quadrature, b.phase_quadrature)
    assert a.abs_diff.max() <= 1e-8
    assert len(a.rows()) == 81
    with pytest.raises(ValueError):
        sweep_phase(2.0, 1.0, 10)


def test_cycle_trajectory_dynamic_term():
    # centred time differences carry relative error (2 pi / n_time)^2 / 6
    p = JTParams(1.0)
    grid = RadialGrid.for_coupling(1.0)
    exact = mean_phase_closed_form(1.0)
    for n_time, tol in [(400, 1.5e-4), (800, 1e-4)]:
        dyn = integrated_phase(cycle_trajectory(p, grid, n_time), p.m).dynamic_term
        assert abs(dyn - exact) <= tol


def test_cycle_dynamic_term_branch_and_omega():
    grid = RadialGrid.for_coupling(1.0)
    vals = {}
    for omega in (1.0, 7.0):
        p = JTParams(1.0, omega=omega, drive=omega)
        for br in ("minus", "plus"):
            vals[omega, br] = integrated_phase(cycle_trajectory(p, grid, 400, br), p.m)
    assert abs(vals[1.0, "plus"].dynamic_term + vals[1.0, "minus"].dynamic_term) <= 1e-12
    assert abs(vals[1.0, "minus"].dynamic_term - vals[7.0, "minus"].dynamic_term) <= 1e-12
    # the delta K term scales with the period
    ratio = vals[1.0, "minus"].delta_k_term / vals[7.0, "minus"].delta_k_term
    assert ratio == pytest.approx(7.0, rel=1e-10)


def test_params_validation():
    with pytest.raises(ValueError):
        JTParams(-1.0)
    assert JTParams(1.0, drive=2.0).period == pytest.approx(math.pi)
