"""Mean-phase functionals of time-dependent wavefunctions.

Fields are sampled on a grid that supplies integration weights (``measure``)
and node coordinates (``nodes``).  Scalar fields carry ``values`` of shape
``(n,)``; multi-component fields carry ``(n_comp, n)`` and every functional
sums over components, with the modulus taken as ``sqrt(psi^dagger psi)``.

Functionals written in terms of psi itself (the phase-rate identity, the
dynamic term, delta K) never need node masking.  Functionals written in
terms of the polar pair (A, S) skip nodes where
``A < node_epsilon * max(A)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .numerics import Grid1D, _as_mass, gradient, second_derivative

__all__ = [
    "ComplexField1D",
    "PolarForm",
    "PhaseBreakdown",
    "Trajectory",
    "PotentialFn",
    "NODE_EPSILON",
    "polar_decompose",
    "entropy_se",
    "phase_rate_form_a",
    "phase_rate_form_b",
    "delta_k",
    "delta_k_split",
    "gradient_norm",
    "integrated_phase",
    "mean_phase_direct",
    "roi_identity_residual",
    "continuity_residual",
    "hj_residual",
]

NODE_EPSILON = 1e-8
MAX_INTERIOR_NODE_FRACTION = 0.2

PotentialFn = Callable[[np.ndarray, float], np.ndarray]


def _fsum(a: np.ndarray) -> float:
    return math.fsum(np.ravel(a).tolist())


@dataclass(frozen=True)
class ComplexField1D:
    grid: Grid1D
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite values")
        if not np.any(v != 0):
            raise ValueError("field vanishes identically")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid1D, fn: Callable[[np.ndarray], np.ndarray],
                      time: float = 0.0) -> "ComplexField1D":
        return cls(grid, fn(grid.nodes), time)

    def norm(self) -> float:
        return _fsum(self.grid.measure * np.abs(self.values) ** 2)

    def normalized(self) -> "ComplexField1D":
        return ComplexField1D(self.grid, self.values / math.sqrt(self.norm()), self.time)

    def with_values(self, values: np.ndarray) -> "ComplexField1D":
        return ComplexField1D(self.grid, values, self.time)

    def conj(self) -> "ComplexField1D":
        return ComplexField1D(self.grid, self.values.conj(), self.time)


@dataclass(frozen=True)
class PolarForm:
    """Modulus and unwrapped phase; masked nodes carry ``phase = nan``."""

    modulus: np.ndarray
    phase: np.ndarray
    node_mask: np.ndarray

    def reconstruct(self) -> np.ndarray:
        out = self.modulus * np.exp(1j * np.where(self.node_mask, 0.0, self.phase))
        return np.where(self.node_mask, 0.0, out)


@dataclass(frozen=True)
class PhaseBreakdown:
    dynamic_term: float
    delta_k_term: float
    normalization_applied: bool

    @property
    def total(self) -> float:
        return self.dynamic_term + self.delta_k_term


@dataclass(frozen=True)
class Trajectory:
    """Snapshots ``values[i]`` at uniformly spaced ``times[i]`` on one grid."""

    grid: object
    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if t.ndim != 1 or v.shape[0] != t.size:
            raise ValueError("one snapshot per time required")
        if v.shape[-1] != self.grid.nodes.size:
            raise ValueError("snapshot does not match the grid")
        if t.size > 1:
            dt = np.diff(t)
            if np.any(dt <= 0):
                raise ValueError("times must be strictly increasing")
            if np.max(np.abs(dt - dt.mean())) > 1e-9 * abs(dt.mean()):
                raise ValueError("times must be uniformly spaced")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.times.size

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self) > 1 else 0.0

    def time_derivative(self) -> np.ndarray:
        if len(self) < 3:
            raise ValueError("need at least 3 snapshots for a time derivative")
        return gradient(self.values, self.times, axis=0)

    def snapshot(self, i: int) -> ComplexField1D:
        return ComplexField1D(self.grid, self.values[i], float(self.times[i]))

    def conj(self) -> "Trajectory":
        return Trajectory(self.grid, self.times, self.values.conj(), dict(self.meta))

    def combine(self, other: "Trajectory", alpha: complex, beta: complex) -> "Trajectory":
        if other.grid is not self.grid and other.grid != self.grid:
            raise ValueError("trajectories live on different grids")
        if not np.array_equal(other.times, self.times):
            raise ValueError("trajectories have different time samples")
        return Trajectory(self.grid, self.times, alpha * self.values + beta * other.values)


def _parts(field_or_values, grid=None):
    """Return (components[n_comp, n], measure, coordinates)."""
    if grid is None:
        grid = field_or_values.grid
        values = field_or_values.values
    else:
        values = field_or_values
    comps = np.atleast_2d(np.asarray(values, dtype=complex))
    if isinstance(grid, Grid1D):
        coords = grid.spacing
    else:
        coords = np.asarray(grid.nodes)
    return comps, np.asarray(grid.measure), coords


def _modulus(comps: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(comps) ** 2, axis=0))


def _node_mask(A: np.ndarray, node_epsilon: float) -> np.ndarray:
    peak = A.max()
    if peak == 0:
        raise ValueError("field vanishes everywhere above threshold")
    return A < node_epsilon * peak


def _interior_fraction(mask: np.ndarray) -> float:
    live = np.flatnonzero(~mask)
    inner = mask[live[0]:live[-1] + 1]
    return float(inner.mean())


def polar_decompose(field: ComplexField1D, node_epsilon: float = NODE_EPSILON) -> PolarForm:
    """Split ``field`` into modulus and a continuously unwrapped phase.

    The sweep starts at the modulus maximum and moves outward in both
    directions, taking at each unmasked node the branch of ``arg(psi)``
    nearest to the previous unmasked node.  A global 2*pi ambiguity remains
    and cancels in any difference.
    """
    psi = np.asarray(field.values)
    A = np.abs(psi)
    mask = _node_mask(A, node_epsilon)
    if mask.all():
        raise ValueError("field vanishes everywhere above threshold")
    raw = np.angle(psi)
    S = np.full(A.shape, np.nan)
    start = int(np.argmax(A))
    S[start] = raw[start]
    for step in (1, -1):
        ref = S[start]
        i = start + step
        while 0 <= i < A.size:
            if not mask[i]:
                d = raw[i] - ref
                ref = ref + d - 2.0 * np.pi * np.round(d / (2.0 * np.pi))
                S[i] = ref
            i += step
    return PolarForm(A, S, mask)


def entropy_se(field, norm_tol: float = 1e-8) -> float:
    """-integral |psi|^2 ln |psi|^2 for a normalised field."""
    comps, mu, _ = _parts(field)
    rho = np.sum(np.abs(comps) ** 2, axis=0)
    norm = _fsum(mu * rho)
    if abs(norm - 1.0) > norm_tol:
        raise ValueError(f"entropy_se needs a normalised field, measured norm {norm!r}")
    safe = np.where(rho < 1e-300, 1.0, rho)
    return -_fsum(mu * rho * np.log(safe))


def _rate_terms(field: ComplexField1D, dpsi_dt: ComplexField1D, node_epsilon: float):
    if dpsi_dt.grid != field.grid:
        raise ValueError("field and its time derivative use different grids")
    psi = np.asarray(field.values)
    psit = np.asarray(dpsi_dt.values)
    A = np.abs(psi)
    mask = _node_mask(A, node_epsilon)
    if _interior_fraction(mask) > MAX_INTERIOR_NODE_FRACTION:
        raise ValueError("phase rate ill-defined near nodes")
    live = ~mask
    dx = field.grid.spacing
    dpsi = gradient(psi, dx)
    # A^2 dS/dt and A^2 grad S from psi directly: no unwrapping needed
    a2_st = np.where(live, (psi.conj() * psit).imag, 0.0)
    a2_gs = np.where(live, (psi.conj() * dpsi).imag, 0.0)
    gs2_a2 = np.where(live, a2_gs ** 2 / np.where(live, A * A, 1.0), 0.0)
    return A, a2_st, gs2_a2


def phase_rate_form_a(field: ComplexField1D, dpsi_dt: ComplexField1D, m=1.0,
                      node_epsilon: float = NODE_EPSILON) -> float:
    """d<S>/dt as the integral of A^2 dS/dt + A^2 (grad S)^2 / m."""
    m = _as_mass(m)
    mu = field.grid.measure
    _, a2_st, gs2_a2 = _rate_terms(field, dpsi_dt, node_epsilon)
    return _fsum(mu * (a2_st + gs2_a2 / m))


def phase_rate_form_b(field: ComplexField1D, dpsi_dt: ComplexField1D, V: PotentialFn, m=1.0,
                      node_epsilon: float = NODE_EPSILON) -> float:
    """d<S>/dt after substituting the Hamilton-Jacobi equation:
    -integral A^2 dS/dt - 2<V> - (1/m) integral (grad A)^2."""
    m = _as_mass(m)
    mu = field.grid.measure
    A, a2_st, _ = _rate_terms(field, dpsi_dt, node_epsilon)
    v = np.asarray(V(field.grid.nodes, field.time), dtype=float)
    dA = gradient(A, field.grid.spacing)
    return _fsum(mu * (-a2_st - 2.0 * A * A * v - dA * dA / m))


def delta_k(field, m=1.0) -> float:
    """(1/m) integral [|grad psi|^2 - (grad |psi|)^2].

    For multi-component fields ``|grad psi|^2`` sums over components and
    ``|psi| = sqrt(psi^dagger psi)``.  Non-negative up to rounding.
    """
    m = _as_mass(m)
    comps, mu, coords = _parts(field)
    if not np.all(np.isfinite(comps)):
        raise ValueError("field has non-finite values")
    dpsi = gradient(comps, coords, axis=-1)
    dA = gradient(_modulus(comps), coords)
    return _fsum(mu * (np.sum(np.abs(dpsi) ** 2, axis=0) - dA * dA)) / m


def gradient_norm(field) -> float:
    """integral |grad psi|^2, summed over components."""
    comps, mu, coords = _parts(field)
    return _fsum(mu * np.sum(np.abs(gradient(comps, coords, axis=-1)) ** 2, axis=0))


def delta_k_split(field, m=1.0, node_epsilon: float = NODE_EPSILON) -> tuple[float, float]:
    """Split delta K into a phase-gradient part and the remainder.

    The phase-gradient part is ``(1/m) integral (Im psi^dagger grad psi)^2 / |psi|^2``,
    i.e. ``A^2 (grad S)^2 / m`` with S the mean phase.  For a scalar field it
    is all of delta K; for a multi-component field the remainder measures how
    fast the component direction turns along the gradient.
    """
    m = _as_mass(m)
    comps, mu, coords = _parts(field)
    dpsi = gradient(comps, coords, axis=-1)
    A = _modulus(comps)
    live = ~_node_mask(A, node_epsilon)
    conn = np.sum(comps.conj() * dpsi, axis=0).imag
    phase_part = _fsum(mu * np.where(live, conn ** 2 / np.where(live, A * A, 1.0), 0.0)) / m
    return phase_part, delta_k(field, m) - phase_part


def _trapezoid_weights(n: int, dt: float) -> np.ndarray:
    w = np.full(n, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def integrated_phase(traj: Trajectory, m=1.0, normalize_each_step: bool = True) -> PhaseBreakdown:
    """Mean phase change over the trajectory: dynamic term plus delta K term.

    dynamic = integral dt Im integral psi^dagger d_t psi, delta K term =
    integral dt delta K(t); with ``normalize_each_step`` both integrands are
    divided by the instantaneous norm.
    """
    m = _as_mass(m)
    if len(traj) == 1:
        return PhaseBreakdown(0.0, 0.0, normalize_each_step)
    psit = traj.time_derivative()
    _, mu, coords = _parts(traj.values[0], traj.grid)
    n_t = len(traj)
    comps = traj.values.reshape(n_t, -1, mu.size)
    dcomps = psit.reshape(n_t, -1, mu.size)
    rho = np.sum(np.abs(comps) ** 2, axis=1)
    dyn = np.sum(comps.conj() * dcomps, axis=1).imag @ mu
    grad2 = np.sum(np.abs(gradient(comps, coords, axis=-1)) ** 2, axis=1)
    dA = gradient(np.sqrt(rho), coords, axis=-1)
    dk = (grad2 - dA * dA) @ mu / m
    if normalize_each_step:
        norm = rho @ mu
        dyn, dk = dyn / norm, dk / norm
    w = _trapezoid_weights(n_t, traj.dt)
    return PhaseBreakdown(_fsum(w * dyn), _fsum(w * dk), normalize_each_step)


def mean_phase_direct(traj: Trajectory, node_epsilon: float = NODE_EPSILON) -> float:
    """<S>(t_f) - <S>(0) with S unwrapped in space at t=0 and in time per node."""
    first = polar_decompose(traj.snapshot(0), node_epsilon)
    raw = np.angle(traj.values)
    seed = np.where(first.node_mask, raw[0], first.phase)
    shifted = raw - raw[0] + seed
    S = np.unwrap(shifted, axis=0)
    mu = np.asarray(traj.grid.measure)

    def mean_s(i):
        A = np.abs(traj.values[i])
        live = ~_node_mask(A, node_epsilon)
        return _fsum(np.where(live, mu * A * A * S[i], 0.0))

    return mean_s(-1) - mean_s(0)


def roi_identity_residual(field: ComplexField1D, dpsi_dt: ComplexField1D, V: PotentialFn,
                          m=1.0) -> float:
    """Im integral psi* d_t psi + integral |grad psi|^2/2m + integral |psi|^2 V (signed)."""
    m = _as_mass(m)
    psi = np.asarray(field.values)
    mu = field.grid.measure
    dpsi = gradient(psi, field.grid.spacing)
    v = np.asarray(V(field.grid.nodes, field.time), dtype=float)
    return _fsum(mu * ((psi.conj() * dpsi_dt.values).imag
                       + np.abs(dpsi) ** 2 / (2.0 * m)
                       + np.abs(psi) ** 2 * v))


def continuity_residual(traj: Trajectory, m=1.0, t_index: int = 1,
                        node_epsilon: float = NODE_EPSILON) -> float:
    """L2 norm of d_t A^2 + (1/m) div(A^2 grad S) over unmasked nodes.

    d_t A^2 is a centred difference between neighbouring snapshots; the
    current A^2 grad S is taken as Im(psi* grad psi).
    """
    m = _as_mass(m)
    if not 0 < t_index < len(traj) - 1:
        raise IndexError(f"t_index {t_index} is not an interior snapshot of {len(traj)}")
    dx = traj.grid.spacing
    rho_prev = np.abs(traj.values[t_index - 1]) ** 2
    rho_next = np.abs(traj.values[t_index + 1]) ** 2
    drho = (rho_next - rho_prev) / (traj.times[t_index + 1] - traj.times[t_index - 1])
    psi = traj.values[t_index]
    current = (psi.conj() * gradient(psi, dx)).imag / m
    res = drho + gradient(current, dx)
    live = ~_node_mask(np.abs(psi), node_epsilon)
    return math.sqrt(_fsum(np.where(live, traj.grid.measure * res * res, 0.0)))


def hj_residual(field: ComplexField1D, dpsi_dt: ComplexField1D, V: PotentialFn, m=1.0,
                node_epsilon: float = NODE_EPSILON) -> float:
    """Density-weighted L2 norm of the Hamilton-Jacobi residual.

    r = (grad S)^2/2m + d_t S + V - (1/2m) A^{-1} lap A on unmasked nodes,
    returned as sqrt(integral A^2 r^2).
    """
    m = _as_mass(m)
    psi = np.asarray(field.values)
    A = np.abs(psi)
    live = ~_node_mask(A, node_epsilon)
    dx = field.grid.spacing
    safe = np.where(live, A * A, 1.0)
    grad_s = (psi.conj() * gradient(psi, dx)).imag / safe
    dt_s = (psi.conj() * dpsi_dt.values).imag / safe
    quantum = second_derivative(A, dx) / np.where(live, A, 1.0)
    v = np.asarray(V(field.grid.nodes, field.time), dtype=float)
    r = grad_s ** 2 / (2.0 * m) + dt_s + v - quantum / (2.0 * m)
    return math.sqrt(_fsum(np.where(live, field.grid.measure * A * A * r * r, 0.0)))
