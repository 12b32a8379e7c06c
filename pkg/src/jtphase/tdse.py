"""Crank-Nicolson propagation of the 1D Schroedinger equation and the
identity checks run on its trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .functionals import (
    ComplexField1D,
    Trajectory,
    continuity_residual,
    hj_residual,
    integrated_phase,
    mean_phase_direct,
    phase_rate_form_a,
    phase_rate_form_b,
    roi_identity_residual,
)
from .numerics import Grid1D, MassParam, _as_mass, gradient

__all__ = [
    "PropagatorConfig",
    "Scenario",
    "SCENARIOS",
    "propagate",
    "hamiltonian_bands",
    "energy",
    "validate_identities",
    "run_scenario",
    "convergence_study",
]

BOUNDARY_DENSITY = 1e-12
NORM_DRIFT_STEP = 1e-10
NORM_DRIFT_TOTAL = 1e-8


@dataclass(frozen=True)
class PropagatorConfig:
    grid: Grid1D
    dt: float
    steps: int
    scheme: str = "implicit_trapezoidal"
    boundary: str = "dirichlet_zero"
    m: MassParam = field(default_factory=MassParam)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.scheme != "implicit_trapezoidal":
            raise ValueError(f"unsupported scheme {self.scheme!r}")
        if self.boundary != "dirichlet_zero":
            raise ValueError(f"unsupported boundary {self.boundary!r}")
        if not isinstance(self.m, MassParam):
            object.__setattr__(self, "m", MassParam(float(self.m)))


def hamiltonian_bands(grid: Grid1D, v: np.ndarray, m: float):
    """(diagonal, off-diagonal) of -(1/2m) d^2/dx^2 + V with zero walls."""
    h2 = grid.spacing ** 2
    diag = 1.0 / (m * h2) + np.asarray(v, dtype=float)
    off = np.full(grid.n - 1, -0.5 / (m * h2))
    return diag, off


def energy(field: ComplexField1D, V, m=1.0) -> float:
    """<psi|H|psi>/<psi|psi> with the propagator's discrete Hamiltonian."""
    m = _as_mass(m)
    psi = field.values
    diag, off = hamiltonian_bands(field.grid, V(field.grid.nodes, field.time), m)
    hpsi = diag * psi
    hpsi[:-1] += off * psi[1:]
    hpsi[1:] += off * psi[:-1]
    return float(np.vdot(psi, hpsi).real / np.vdot(psi, psi).real)


def _boundary_ratio(psi: np.ndarray) -> float:
    rho = np.abs(psi) ** 2
    return float(max(rho[0], rho[-1]) / rho.max())


def propagate(initial: ComplexField1D, V, config: PropagatorConfig) -> Trajectory:
    """Evolve ``initial`` with (1 + i dt H/2) psi' = (1 - i dt H/2) psi.

    The potential is sampled at the midpoint of each step.  Returns every
    step as a snapshot.
    """
    grid = config.grid
    if initial.grid != grid:
        raise ValueError("initial state is not on the propagator grid")
    m = config.m.m
    dt = config.dt
    psi = np.array(initial.values, dtype=complex)
    norm0 = initial.norm()
    if abs(norm0 - 1.0) > 1e-8:
        raise ValueError(f"initial state must be normalised (norm {norm0!r})")
    if _boundary_ratio(psi) > BOUNDARY_DENSITY:
        raise ValueError("initial density is not negligible at the walls")

    w = grid.weights
    out = np.empty((config.steps + 1, grid.n), dtype=complex)
    out[0] = psi
    t0 = initial.time
    ab = np.zeros((3, grid.n), dtype=complex)
    cached_v = None
    prev_norm = norm0
    for step in range(config.steps):
        t_mid = t0 + (step + 0.5) * dt
        v = np.asarray(V(grid.nodes, t_mid), dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"potential is not finite at t={t_mid}")
        if cached_v is None or not np.array_equal(v, cached_v):
            diag, off = hamiltonian_bands(grid, v, m)
            ab[0, 1:] = 0.5j * dt * off
            ab[1] = 1.0 + 0.5j * dt * diag
            ab[2, :-1] = 0.5j * dt * off
            cached_v = v
        rhs = (1.0 - 0.5j * dt * diag) * psi
        rhs[:-1] -= 0.5j * dt * off * psi[1:]
        rhs[1:] -= 0.5j * dt * off * psi[:-1]
        try:
            psi = scipy.linalg.solve_banded((1, 1), ab, rhs, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError(f"linear solve failed at step {step}") from exc
        norm = float(np.dot(w, psi.real ** 2 + psi.imag ** 2))
        if abs(norm - prev_norm) > NORM_DRIFT_STEP or abs(norm - norm0) > NORM_DRIFT_TOTAL:
            raise RuntimeError(
                f"norm drift at step {step}: {norm!r} (initial {norm0!r})"
            )
        prev_norm = norm
        out[step + 1] = psi
    if _boundary_ratio(psi) > BOUNDARY_DENSITY:
        raise RuntimeError("wavefunction reached the walls; widen the grid")
    times = t0 + dt * np.arange(config.steps + 1)
    return Trajectory(grid, times, out, {"dt": dt, "m": m})


@dataclass(frozen=True)
class Scenario:
    """Node-free test fixtures: oscillator ground state, displaced
    (coherent) oscillator state, free Gaussian packet."""

    id: str
    omega: float = 1.0
    displacement: float = 1.0
    width: float = 1.0
    momentum: float = 1.0
    m: float = 1.0

    def __post_init__(self):
        if self.id not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.id!r}; choose from {SCENARIOS}")
        if not (self.omega > 0 and self.width > 0 and self.m > 0):
            raise ValueError("omega, width and m must be positive")
        if abs(self.displacement) > 5 or abs(self.momentum) > 5:
            raise ValueError("displacement and momentum are limited to |.| <= 5")

    @property
    def sigma0(self) -> float:
        """Position standard deviation at t = 0."""
        if self.id == "free_gaussian":
            return self.width
        return math.sqrt(0.5 / (self.m * self.omega))

    def potential(self):
        if self.id == "free_gaussian":
            return lambda x, t: np.zeros_like(x)
        k = self.m * self.omega ** 2
        return lambda x, t: 0.5 * k * x * x

    def half_width(self, t_final: float) -> float:
        if self.id == "free_gaussian":
            spread = math.sqrt(self.width ** 2 + (t_final / (2.0 * self.width * self.m)) ** 2)
            return 12.0 * spread + abs(self.momentum) * t_final / self.m
        shift = abs(self.displacement) if self.id == "ho_coherent" else 0.0
        return 12.0 * self.sigma0 + shift

    def grid(self, n: int, t_final: float) -> Grid1D:
        return Grid1D.symmetric(self.half_width(t_final), n)

    def initial(self, grid: Grid1D) -> ComplexField1D:
        x = grid.nodes
        if self.id == "free_gaussian":
            s = self.width
            psi = (2.0 * math.pi * s * s) ** -0.25 * np.exp(-x * x / (4.0 * s * s) + 1j * self.momentum * x)
        else:
            a = self.m * self.omega
            x0 = self.displacement if self.id == "ho_coherent" else 0.0
            psi = (a / math.pi) ** 0.25 * np.exp(-0.5 * a * (x - x0) ** 2) + 0j
        return ComplexField1D(grid, psi, 0.0).normalized()

    def exact_energy(self) -> float:
        if self.id == "ho_ground":
            return 0.5 * self.omega
        if self.id == "ho_coherent":
            return 0.5 * self.omega + 0.5 * self.m * self.omega ** 2 * self.displacement ** 2
        return 0.5 * self.momentum ** 2 / self.m + 1.0 / (8.0 * self.m * self.width ** 2)


SCENARIOS = ("ho_ground", "ho_coherent", "free_gaussian")


def run_scenario(scenario: Scenario, n: int, dt: float, t_final: float) -> Trajectory:
    """Propagate a fixture to ``t_final``; dt is shrunk so steps * dt = t_final."""
    steps = max(1, math.ceil(t_final / dt - 1e-9))
    grid = scenario.grid(n, t_final)
    cfg = PropagatorConfig(grid, t_final / steps, steps, m=MassParam(scenario.m))
    return propagate(scenario.initial(grid), scenario.potential(), cfg)


def _interior(traj: Trajectory, samples: int | None):
    idx = np.arange(1, len(traj) - 1)
    if samples is not None and idx.size > samples:
        idx = idx[np.linspace(0, idx.size - 1, samples).round().astype(int)]
    return idx


def validate_identities(traj: Trajectory, V, m=1.0, samples: int | None = None) -> dict:
    """Identity residuals over interior snapshots of a propagated trajectory.

    Normalisations: ``roi`` and ``form_gap`` are divided by the energy scale
    E_s = int |grad psi|^2/2m + int |psi|^2 |V| at the same snapshot;
    ``continuity`` by the L2 norm of the density; ``hj`` is the
    density-weighted L2 norm divided by E_s.  ``phase_gap`` is the absolute
    difference between the integrated phase and the directly measured
    change of <S> (radians).
    """
    m = _as_mass(m)
    psit = traj.time_derivative()
    out = {"roi": 0.0, "continuity": 0.0, "hj": 0.0, "form_gap": 0.0}
    mu = traj.grid.measure
    dx = traj.grid.spacing
    for i in _interior(traj, samples):
        f = traj.snapshot(int(i))
        ft = ComplexField1D(traj.grid, psit[i], f.time)
        v = np.asarray(V(traj.grid.nodes, f.time), dtype=float)
        rho = np.abs(f.values) ** 2
        scale = math.fsum((mu * (np.abs(gradient(f.values, dx)) ** 2 / (2.0 * m) + rho * np.abs(v))).tolist())
        rho_l2 = math.sqrt(math.fsum((mu * rho * rho).tolist()))
        vals = {
            "roi": abs(roi_identity_residual(f, ft, V, m)) / scale,
            "continuity": continuity_residual(traj, m, int(i)) / rho_l2,
            "hj": hj_residual(f, ft, V, m) / scale,
            "form_gap": abs(phase_rate_form_a(f, ft, m) - phase_rate_form_b(f, ft, V, m)) / scale,
        }
        for key, val in vals.items():
            out[key] = max(out[key], val)
    breakdown = integrated_phase(traj, m, normalize_each_step=True)
    out["integrated_phase"] = breakdown.total
    out["dynamic_term"] = breakdown.dynamic_term
    out["delta_k_term"] = breakdown.delta_k_term
    out["direct_phase"] = mean_phase_direct(traj)
    out["phase_gap"] = abs(breakdown.total - out["direct_phase"])
    first, last = traj.snapshot(0), traj.snapshot(len(traj) - 1)
    out["norm_drift"] = abs(last.norm() - first.norm())
    e0 = energy(first, V, m)
    out["energy_drift"] = abs(energy(last, V, m) - e0) / abs(e0)
    return out


def convergence_study(scenario: Scenario, n: int, dt: float, t_final: float,
                      refinements: int = 1, samples: int | None = None) -> list[dict]:
    """Validation reports at (n, dt), (2n-1, dt/2), ... (dx and dt halved together)."""
    reports = []
    for level in range(refinements + 1):
        scale = 2 ** level
        traj = run_scenario(scenario, (n - 1) * scale + 1, dt / scale, t_final)
        rep = validate_identities(traj, scenario.potential(), scenario.m, samples)
        rep.update(level=level, n=traj.grid.n, dt=traj.dt, t_final=t_final)
        reports.append(rep)
    return reports


def observed_ratios(reports: list[dict], keys) -> dict:
    """Error ratio coarse/fine for each key between consecutive levels."""
    ratios = {}
    for key in keys:
        vals = [r[key] for r in reports]
        ratios[key] = [a / b if b else math.inf for a, b in zip(vals, vals[1:])]
    return ratios
