"""Linear E x e Jahn-Teller guessed-solution doublet and its cyclic mean phase.

The angular coordinate is pinned to ``phi = drive * t`` and enters only as a
parameter; every integral runs over the radial coordinate q with measure
``q dq``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .functionals import Trajectory, delta_k, delta_k_split
from .numerics import (
    IDENTITY,
    SIGMA_X,
    SIGMA_Z,
    MassParam,
    RadialGrid,
    erf_stable,
    integrate_radial,
    mat2_exp_hermitian,
)

__all__ = [
    "JTParams",
    "SpinorRadialField",
    "SweepResult",
    "guessed_exponent",
    "guessed_operator",
    "operator_sign",
    "radial_profiles",
    "build_doublet",
    "mean_phase_quadrature",
    "mean_phase_closed_form",
    "delta_k_jt",
    "delta_k_jt_split",
    "sweep_phase",
    "cycle_trajectory",
]

BRANCHES = ("minus", "plus")
MIN_PAD = 6.0


@dataclass(frozen=True)
class JTParams:
    k: float
    omega: float = 1.0
    drive: float = 1.0
    m: MassParam = field(default_factory=MassParam)

    def __post_init__(self):
        if not self.k >= 0:
            raise ValueError(f"coupling k must be >= 0, got {self.k}")
        if not self.omega > 0:
            raise ValueError(f"omega must be > 0, got {self.omega}")
        if not self.drive > 0:
            raise ValueError(f"drive rate must be > 0, got {self.drive}")
        if not isinstance(self.m, MassParam):
            object.__setattr__(self, "m", MassParam(float(self.m)))

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.drive


@dataclass(frozen=True)
class SpinorRadialField:
    grid: RadialGrid
    phi: float
    up: np.ndarray
    down: np.ndarray
    branch: str = "minus"

    def __post_init__(self):
        if self.branch not in BRANCHES:
            raise ValueError(f"branch must be one of {BRANCHES}, got {self.branch!r}")
        for name in ("up", "down"):
            v = np.asarray(getattr(self, name), dtype=complex)
            if v.shape != self.grid.nodes.shape:
                raise ValueError(f"{name} component does not match the grid")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} component has non-finite values")
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def values(self) -> np.ndarray:
        return np.stack([self.up, self.down])

    def density(self) -> np.ndarray:
        return np.abs(self.up) ** 2 + np.abs(self.down) ** 2

    def norm(self) -> float:
        return integrate_radial(self.grid.nodes * self.density(), self.grid)

    def normalized(self) -> "SpinorRadialField":
        s = 1.0 / math.sqrt(self.norm())
        return SpinorRadialField(self.grid, self.phi, self.up * s, self.down * s, self.branch)

    def conj(self) -> "SpinorRadialField":
        other = "plus" if self.branch == "minus" else "minus"
        return SpinorRadialField(self.grid, self.phi, self.up.conj(), self.down.conj(), other)


@dataclass(frozen=True)
class SweepResult:
    k: np.ndarray
    phase_quadrature: np.ndarray
    phase_closed_form: np.ndarray

    @property
    def abs_diff(self) -> np.ndarray:
        return np.abs(self.phase_quadrature - self.phase_closed_form)

    def rows(self):
        return list(zip(self.k.tolist(), self.phase_quadrature.tolist(),
                        self.phase_closed_form.tolist(), self.abs_diff.tolist()))


def guessed_exponent(q: float, phi: float, k: float) -> np.ndarray:
    """-(1/2)[(q_a - k sigma_z)^2 + (q_b + k sigma_x)^2] as a 2x2 matrix."""
    qa, qb = q * math.cos(phi), q * math.sin(phi)
    a = qa * IDENTITY - k * SIGMA_Z
    b = qb * IDENTITY + k * SIGMA_X
    return -0.5 * (a @ a + b @ b)


@lru_cache(maxsize=None)
def operator_sign() -> int:
    """Sign of the sinh term in the reduced operator, fixed by matching the
    closed form against the matrix exponential of the exponent."""
    q, phi, k = 1.0, 0.7, 0.8
    ref = mat2_exp_hermitian(guessed_exponent(q, phi, k))
    for s in (1, -1):
        if np.max(np.abs(_reduced_operator(q, phi, k, s) - ref)) <= 1e-12:
            return s
    raise RuntimeError("reduced guessed operator matches neither sign convention")


def _reduced_operator(q: float, phi: float, k: float, s: int) -> np.ndarray:
    c, sh = radial_profiles(np.array([q]), k)
    axis = SIGMA_Z * math.cos(phi) - SIGMA_X * math.sin(phi)
    return c[0] * IDENTITY + s * sh[0] * axis


def radial_profiles(q: np.ndarray, k: float, scaled: bool = False):
    """e^{-k^2-q^2/2} (cosh kq, sinh kq), overflow-free for any k.

    With ``scaled`` the common factor e^{-k^2/2} is dropped.
    """
    q = np.asarray(q, dtype=float)
    g = np.exp(-0.5 * (q - k) ** 2)
    e = np.exp(-2.0 * k * q)
    cosh_part = 0.5 * g * (1.0 + e)
    sinh_part = -0.5 * g * np.expm1(-2.0 * k * q)
    if not scaled:
        f = math.exp(-0.5 * k * k)
        cosh_part, sinh_part = f * cosh_part, f * sinh_part
    return cosh_part, sinh_part


def guessed_operator(q: float, phi: float, k: float) -> np.ndarray:
    """e^{-k^2-q^2/2}[cosh(kq) I + s sinh(kq)(sigma_z cos phi - sigma_x sin phi)]."""
    if q < 0:
        raise ValueError(f"radial coordinate must be >= 0, got {q}")
    return _reduced_operator(float(q), float(phi), float(k), operator_sign()).real.astype(complex)


def _doublet_components(k: float, q: np.ndarray, phi: float, scaled: bool = False):
    c, sh = radial_profiles(q, k, scaled)
    rot = operator_sign() * sh * np.exp(1j * phi)
    r2 = 1.0 / math.sqrt(2.0)
    # operator applied to (1, -i)/sqrt(2); the axis maps (1, -i) to e^{i phi}(1, i)
    return r2 * (c + rot), r2 * (-1j * c + 1j * rot)


def build_doublet(params: JTParams, grid: RadialGrid, phi: float, scaled: bool = False):
    """Return (minus, plus): the operator applied to (1, -i)/sqrt2 and its conjugate."""
    up, down = _doublet_components(params.k, grid.nodes, phi, scaled)
    minus = SpinorRadialField(grid, phi, up, down, "minus")
    return minus, minus.conj()


def _check_truncation(k: float, grid: RadialGrid) -> None:
    if grid.q_max < k + MIN_PAD:
        raise ValueError(
            f"radial truncation unsafe: q_max={grid.q_max} < k + {MIN_PAD} for k={k}"
        )


def mean_phase_quadrature(params: JTParams | float, grid: RadialGrid | None = None,
                          branch: str = "minus") -> float:
    """2 pi N/D with N = int q e^{-q^2} sinh^2(kq), D = int q e^{-q^2} cosh(2kq)."""
    if not isinstance(params, JTParams):
        params = JTParams(float(params))
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}")
    k = params.k
    grid = grid if grid is not None else RadialGrid.for_coupling(k)
    _check_truncation(k, grid)
    c, sh = radial_profiles(grid.nodes, k, scaled=True)
    q = grid.nodes
    num = integrate_radial(q * sh * sh, grid)
    den = integrate_radial(q * (c * c + sh * sh), grid)
    phase = 2.0 * math.pi * num / den
    return phase if branch == "minus" else -phase


def mean_phase_closed_form(k: float) -> float:
    """pi [1 - e^{-k^2} / (e^{-k^2} + sqrt(pi) k erf k)]."""
    if not k >= 0:
        raise ValueError(f"coupling k must be >= 0, got {k}")
    g = math.exp(-k * k)
    return math.pi * (1.0 - g / (g + math.sqrt(math.pi) * k * erf_stable(k)))


def _branch_field(params: JTParams, grid: RadialGrid, phi: float, branch: str,
                  scaled: bool = False) -> SpinorRadialField:
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}")
    minus, plus = build_doublet(params, grid, phi, scaled)
    return minus if branch == "minus" else plus


def delta_k_jt(params: JTParams, grid: RadialGrid, phi: float, branch: str = "minus") -> float:
    """(1/m) int q dq [|d_q Psi|^2 - (d_q |Psi|)^2] for one doublet member."""
    return delta_k(_branch_field(params, grid, phi, branch), params.m)


def delta_k_jt_split(params: JTParams, grid: RadialGrid, phi: float,
                     branch: str = "minus") -> tuple[float, float]:
    """(phase-gradient part, remainder) of :func:`delta_k_jt`."""
    return delta_k_split(_branch_field(params, grid, phi, branch), params.m)


def _threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("JTPHASE_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def sweep_phase(k_min: float, k_max: float, steps: int, n_nodes: int = 400,
                rule_id: str = "gauss_legendre_mapped", threads: int | None = None) -> SweepResult:
    """Cyclic mean phase on ``steps`` uniformly spaced couplings."""
    if not (0 <= k_min < k_max):
        raise ValueError(f"need 0 <= k_min < k_max, got ({k_min}, {k_max})")
    if steps < 2:
        raise ValueError(f"need steps >= 2, got {steps}")
    ks = np.linspace(k_min, k_max, steps)

    def row(k):
        grid = RadialGrid.for_coupling(k, n_nodes, rule_id)
        return mean_phase_quadrature(JTParams(k), grid), mean_phase_closed_form(k)

    n = _threads(threads)
    if n == 1:
        out = [row(k) for k in ks.tolist()]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            out = list(pool.map(row, ks.tolist()))
    quad, closed = (np.array(c) for c in zip(*out))
    return SweepResult(ks, quad, closed)


def cycle_trajectory(params: JTParams, grid: RadialGrid, n_time: int,
                     branch: str = "minus", scaled: bool = False) -> Trajectory:
    """Snapshots Psi(q, drive * t_i), t_i = i T / n_time for i = 0..n_time."""
    if n_time < 8:
        raise ValueError(f"need n_time >= 8, got {n_time}")
    times = np.arange(n_time + 1) * (params.period / n_time)
    values = np.stack([
        _branch_field(params, grid, params.drive * t, branch, scaled).values for t in times
    ])
    return Trajectory(grid, times, values, {"k": params.k, "branch": branch})
