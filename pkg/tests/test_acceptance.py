"""Acceptance gate: one PASS/FAIL line per criterion.

Each test records its verdict line (also echoed in the pytest terminal
summary) and then asserts it, so a red criterion shows up both ways.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from jtphase.cli import RESIDUAL_FLOOR, RESIDUAL_KEYS, VALIDATE_DEFAULTS
from jtphase.exactdiag import fock_expand_guessed, ground_doublet, guessed_energy
from jtphase.functionals import ComplexField1D, entropy_se, gradient_norm, integrated_phase
from jtphase.jahnteller import (
    JTParams,
    build_doublet,
    cycle_trajectory,
    delta_k_jt,
    sweep_phase,
)
from jtphase.numerics import Grid1D, RadialGrid
from jtphase.tdse import SCENARIOS, Scenario, convergence_study, run_scenario, validate_identities

from oracles import GAUSSIAN_ENTROPY, JT_PHASE, jt_phase_bruteforce


def report(number, checks, elapsed, budget):
    """checks: list of (label, ok). Adds the runtime check and records the line."""
    checks = list(checks) + [(f"runtime {elapsed:.2f}s <= {budget:g}s", elapsed <= budget)]
    ok = all(c[1] for c in checks)
    failed = [c[0] for c in checks if not c[1]]
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}"
    if failed:
        line += " [failed: " + "; ".join(failed) + "]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    for label, good in checks:
        print(f"    {'ok  ' if good else 'FAIL'} {label}")
    assert ok, line


def test_criterion_1_phase_curve():
    t0 = time.perf_counter()
    res = sweep_phase(0.0, 4.0, 81, threads=1)
    elapsed = time.perf_counter() - t0
    q = res.phase_quadrature
    at = {k: float(np.interp(k, res.k, q)) for k in (0.5, 1.0, 2.0)}
    # pointwise targets are oracle-derived; confirm the oracle by brute force first
    oracle_ok = all(abs(jt_phase_bruteforce(k) - JT_PHASE[k]) <= 1e-9 for k in (0.5, 1.0, 2.0))
    targets = {0.5: 1.1686, 1.0: 2.5209, 2.0: 3.1254}
    checks = [
        (f"phase(0) = {q[0]:.3g}", abs(q[0]) <= 1e-12),
        ("strictly increasing", bool(np.all(np.diff(q) > 0))),
        (f"phase(4) = {q[-1]:.10f} >= 0.999 pi", q[-1] >= 0.999 * math.pi),
        (f"max |quad - closed| = {res.abs_diff.max():.2e} <= 1e-8", res.abs_diff.max() <= 1e-8),
        ("closed form confirmed by brute-force quadrature", oracle_ok),
    ]
    for k, target in targets.items():
        checks.append((f"phase({k}) = {at[k]:.6f} vs {target} within 1e-3", abs(at[k] - target) <= 1e-3))
    report(1, checks, elapsed, 1.0)


def test_criterion_2_delta_k_vanishes():
    t0 = time.perf_counter()
    checks = []
    for k in (0.5, 1.0, 2.0, 3.0, 5.0):
        params = JTParams(k)
        grid = RadialGrid.for_coupling(k)
        worst = 0.0
        for phi in (0.0, 0.3, 2.1):
            field = build_doublet(params, grid, phi)[0]
            worst = max(worst, abs(delta_k_jt(params, grid, phi)) / gradient_norm(field))
        checks.append((f"k={k}: max |dK|/int|dPsi|^2 = {worst:.3e} <= 1e-10", worst <= 1e-10))
    elapsed = time.perf_counter() - t0
    report(2, checks, elapsed, 1.0)


def test_criterion_3_doublet_antisymmetry_and_drive_independence():
    t0 = time.perf_counter()
    grid = RadialGrid.for_coupling(1.0)
    out = {}
    for omega in (1.0, 7.0):
        params = JTParams(1.0, omega=omega, drive=omega)
        for branch in ("minus", "plus"):
            traj = cycle_trajectory(params, grid, 400, branch)
            out[omega, branch] = integrated_phase(traj, params.m)
    elapsed = time.perf_counter() - t0
    m1, p1, m7 = out[1.0, "minus"], out[1.0, "plus"], out[7.0, "minus"]
    dyn_anti = abs(p1.dynamic_term + m1.dynamic_term)
    dyn_omega = abs(m1.dynamic_term - m7.dynamic_term)
    tot_anti = abs(p1.total + m1.total)
    tot_omega = abs(m1.total - m7.total)
    checks = [
        (f"dynamic term: |plus + minus| = {dyn_anti:.2e} <= 1e-12", dyn_anti <= 1e-12),
        (f"dynamic term: |Omega=1 - Omega=7| = {dyn_omega:.2e} <= 1e-12", dyn_omega <= 1e-12),
        (f"total: |plus + minus| = {tot_anti:.2e} <= 1e-12", tot_anti <= 1e-12),
        (f"total: |Omega=1 - Omega=7| = {tot_omega:.2e} <= 1e-12", tot_omega <= 1e-12),
    ]
    report(3, checks, elapsed, 60.0)


def test_criterion_4_stationary_phase():
    t0 = time.perf_counter()
    sc = Scenario("ho_ground")
    errs = []
    for n, dt in [(1001, 0.01), (2001, 0.005)]:
        traj = run_scenario(sc, n, dt, 2 * math.pi)
        rep = validate_identities(traj, sc.potential(), sc.m, samples=8)
        errs.append(abs(rep["integrated_phase"] + math.pi))
    elapsed = time.perf_counter() - t0
    ratio = errs[0] / errs[1]
    checks = [
        (f"|total + pi| = {errs[1]:.3e} <= 2e-3 at n=2001, dt=0.005", errs[1] <= 2e-3),
        (f"error ratio per halving = {ratio:.3f} in [3, 5]", 3.0 <= ratio <= 5.0),
    ]
    report(4, checks, elapsed, 30.0)


@pytest.mark.slow
def test_criterion_5_identity_suite():
    t0 = time.perf_counter()
    checks = []
    for sid in SCENARIOS:
        n, dt, tf = VALIDATE_DEFAULTS[sid]
        reports = convergence_study(Scenario(sid), (n - 1) // 2 + 1, 2 * dt, tf, 1, samples=16)
        coarse, fine = reports
        for key in RESIDUAL_KEYS:
            checks.append((f"{sid} {key} = {fine[key]:.2e} <= 1e-5", fine[key] <= 1e-5))
            a, b = coarse[key], fine[key]
            if a <= RESIDUAL_FLOOR and b <= RESIDUAL_FLOOR:
                checks.append((f"{sid} {key} at rounding floor ({a:.1e} -> {b:.1e})", True))
            else:
                r = a / b
                checks.append((f"{sid} {key} ratio = {r:.3f} in [3, 5]", 3.0 <= r <= 5.0))
    elapsed = time.perf_counter() - t0
    report(5, checks, elapsed, 60.0)


def test_criterion_6_exact_diagonalisation():
    t0 = time.perf_counter()
    e0, e1, _ = ground_doublet(0.0, 1.0, 30)
    checks = [(f"k=0: E0 = {e0!r}, E1 = {e1!r}", e0 == 0.0 and e1 == 0.0)]
    series = [ground_doublet(2.0, 1.0, n)[0] for n in (10, 15, 20, 25, 30)]
    mono = all(b <= a + 1e-12 for a, b in zip(series, series[1:]))
    checks.append(("E0 nonincreasing in cutoff (k=2, cutoff 10..30)", mono))
    for k in (0.5, 1.0, 2.0, 3.0, 4.0):
        a, b, _ = ground_doublet(k, 1.0, 30)
        eg = guessed_energy(k, 1.0, 30)
        checks.append((f"k={k}: E1 - E0 = {b - a:.1e} <= 1e-8", b - a <= 1e-8))
        checks.append((f"k={k}: guessed {eg:.10f} >= E0 {a:.10f}", eg >= a - 1e-10))
    _, captured = fock_expand_guessed(1.0, 20)
    checks.append((f"captured norm (k=1, cutoff=20) = {captured:.12f} >= 0.9999", captured >= 0.9999))
    elapsed = time.perf_counter() - t0
    report(6, checks, elapsed, 60.0)


def test_criterion_7_entropy():
    t0 = time.perf_counter()
    grid = Grid1D.symmetric(12.0, 4001)
    f = ComplexField1D(grid, np.exp(-0.5 * grid.nodes ** 2)).normalized()
    se = entropy_se(f)
    # phase factors that rotate every sample without rounding must give identical output
    exact = all(entropy_se(f.with_values(f.values * u)) == se for u in (1j, -1.0, -1j))
    # a general e^{i theta} rounds each sample, so agreement is to the last bits
    rounded = max(abs(entropy_se(f.with_values(f.values * np.exp(1j * th))) - se)
                  for th in (0.3, 1.7, -2.9))
    elapsed = time.perf_counter() - t0
    checks = [
        (f"S_e = {se:.9f} vs {GAUSSIAN_ENTROPY:.9f} within 1e-6", abs(se - GAUSSIAN_ENTROPY) <= 1e-6),
        ("global phase invariance exact for factors 1j, -1, -1j", exact),
        (f"general global phase: max change {rounded:.1e} <= 4 ulp", rounded <= 4 * np.spacing(se)),
    ]
    report(7, checks, elapsed, 1.0)
