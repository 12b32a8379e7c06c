"""Grids, radial quadrature, erf and closed-form 2x2 matrix exponentials."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

__all__ = [
    "Grid1D",
    "RadialGrid",
    "MassParam",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "IDENTITY",
    "erf_stable",
    "integrate_radial",
    "mat2_exp_hermitian",
    "gradient",
    "second_derivative",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


SIGMA_X = _frozen(np.array([[0, 1], [1, 0]], dtype=complex))
SIGMA_Y = _frozen(np.array([[0, -1j], [1j, 0]], dtype=complex))
SIGMA_Z = _frozen(np.array([[1, 0], [0, -1]], dtype=complex))
IDENTITY = _frozen(np.eye(2, dtype=complex))


@dataclass(frozen=True)
class MassParam:
    m: float = 1.0

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"mass must be positive, got {self.m}")


def _as_mass(m) -> float:
    if isinstance(m, MassParam):
        return m.m
    return MassParam(float(m)).m


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on [x_min, x_max] with n nodes (endpoints included)."""

    x_min: float
    x_max: float
    n: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"Grid1D needs n >= 3, got {self.n}")
        if not self.x_max > self.x_min:
            raise ValueError("Grid1D needs x_max > x_min")
        object.__setattr__(
            self, "nodes", _frozen(np.linspace(self.x_min, self.x_max, self.n))
        )

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def weights(self) -> np.ndarray:
        # trapezoid; fields are expected to vanish at the walls
        w = np.full(self.n, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w

    @property
    def measure(self) -> np.ndarray:
        return self.weights

    @classmethod
    def symmetric(cls, half_width: float, n: int) -> "Grid1D":
        return cls(-half_width, half_width, n)


@lru_cache(maxsize=32)
def _legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


@dataclass(frozen=True)
class RadialGrid:
    """Quadrature nodes and weights for integrals over q in [0, q_max].

    The weights integrate plain ``dq``; the polar measure ``q dq`` is exposed
    separately as :attr:`measure`.
    """

    q_max: float
    n: int
    rule_id: str = "gauss_legendre_mapped"
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.q_max > 0:
            raise ValueError(f"q_max must be positive, got {self.q_max}")
        if self.rule_id == "gauss_legendre_mapped":
            if self.n < 1:
                raise ValueError("need at least one node")
            x, w = _legendre(self.n)
            nodes = 0.5 * self.q_max * (x + 1.0)
            weights = 0.5 * self.q_max * w
        elif self.rule_id == "composite_simpson":
            if self.n < 3 or self.n % 2 == 0:
                raise ValueError("composite Simpson needs an odd n >= 3")
            nodes = np.linspace(0.0, self.q_max, self.n)
            h = self.q_max / (self.n - 1)
            weights = np.full(self.n, 2.0)
            weights[1::2] = 4.0
            weights[0] = weights[-1] = 1.0
            weights *= h / 3.0
        else:
            raise ValueError(f"unknown quadrature rule {self.rule_id!r}")
        object.__setattr__(self, "nodes", _frozen(nodes))
        object.__setattr__(self, "weights", _frozen(weights))

    @property
    def measure(self) -> np.ndarray:
        return self.nodes * self.weights

    @classmethod
    def for_coupling(cls, k: float, n: int = 400, rule_id: str = "gauss_legendre_mapped",
                     pad: float = 8.0) -> "RadialGrid":
        """Grid sized by the ``q_max = k + pad`` truncation policy."""
        if rule_id == "composite_simpson" and n % 2 == 0:
            n += 1
        return cls(float(k) + pad, n, rule_id)


def erf_stable(x: float) -> float:
    """Error function to full double precision (odd symmetry exact)."""
    x = float(x)
    if not math.isfinite(x):
        if math.isnan(x):
            raise ValueError("erf of NaN")
        return math.copysign(1.0, x)
    return math.copysign(math.erf(abs(x)), x)


def integrate_radial(f: Callable[[np.ndarray], np.ndarray] | np.ndarray, grid: RadialGrid) -> float:
    """Return ``sum_i w_i f(q_i)`` with exactly rounded summation.

    ``f`` may be a vectorised callable or an array of values already sampled
    on ``grid.nodes``.
    """
    values = np.asarray(f(grid.nodes) if callable(f) else f, dtype=float)
    if values.shape != grid.nodes.shape:
        values = np.broadcast_to(values, grid.nodes.shape)
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise FloatingPointError(
            f"integrand is not finite at node {i} (q={grid.nodes[i]!r}): {values[i]!r}"
        )
    return math.fsum((grid.weights * values).tolist())


def _check_hermitian(M: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.conj().T)) > tol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    return M


def mat2_exp_hermitian(M) -> np.ndarray:
    """exp(M) for Hermitian 2x2 ``M`` via M = c I + v.sigma.

    exp(M) = e^c [cosh|v| I + sinh|v| (v.sigma)/|v|]
    """
    M = _check_hermitian(M)
    c = 0.5 * (M[0, 0] + M[1, 1]).real
    vz = 0.5 * (M[0, 0] - M[1, 1]).real
    vx = 0.5 * (M[0, 1] + M[1, 0]).real
    vy = 0.5 * (M[1, 0] - M[0, 1]).imag
    r = math.sqrt(vx * vx + vy * vy + vz * vz)
    if r == 0.0:
        return math.exp(c) * np.eye(2, dtype=complex)
    vsig = (vx * SIGMA_X + vy * SIGMA_Y + vz * SIGMA_Z) / r
    return math.exp(c) * (math.cosh(r) * IDENTITY + math.sinh(r) * vsig)


def gradient(f: np.ndarray, spacing, axis: int = -1) -> np.ndarray:
    """Centred second-order derivative, one-sided second-order at the ends.

    ``spacing`` is either a scalar step or the (possibly non-uniform) node
    coordinates.
    """
    return np.gradient(f, spacing, axis=axis, edge_order=2)


def second_derivative(f: np.ndarray, dx: float) -> np.ndarray:
    """Three-point second derivative on a uniform grid, one-sided at the ends."""
    f = np.asarray(f)
    out = np.empty_like(f)
    inv = 1.0 / (dx * dx)
    out[..., 1:-1] = (f[..., 2:] - 2.0 * f[..., 1:-1] + f[..., :-2]) * inv
    out[..., 0] = (2.0 * f[..., 0] - 5.0 * f[..., 1] + 4.0 * f[..., 2] - f[..., 3]) * inv
    out[..., -1] = (2.0 * f[..., -1] - 5.0 * f[..., -2] + 4.0 * f[..., -3] - f[..., -4]) * inv
    return out
