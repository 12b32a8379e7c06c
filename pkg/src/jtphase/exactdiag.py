"""Truncated Fock-space diagonalisation of the linear E x e Hamiltonian.

H = (omega/2) {a^+a + b^+b - (k/sqrt2)[(a^+ + a) sigma_z - (b^+ + b) sigma_x]}

taken exactly as written (no zero-point constant).  Coordinates map to
bosons through q = (a + a^+)/sqrt2, so the adiabatic minimum sits at |q| = k,
the displacement used by the guessed solution.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .jahnteller import JTParams, operator_sign, radial_profiles
from .numerics import RadialGrid

__all__ = [
    "FockBasis",
    "HamiltonianMatrix",
    "build_hamiltonian",
    "ground_doublet",
    "hermite_functions",
    "fock_expand_guessed",
    "guessed_energy",
]

MAX_DIMENSION = 10**6
DENSE_LIMIT = 5000
MIN_CAPTURED_NORM = 0.999


@dataclass(frozen=True)
class FockBasis:
    """States |n_a, n_b> (x) |e>, 0 <= n_a, n_b <= cutoff, e in {0, 1}."""

    cutoff: int

    def __post_init__(self):
        if self.cutoff < 1:
            raise ValueError(f"cutoff must be >= 1, got {self.cutoff}")

    @property
    def dimension(self) -> int:
        return 2 * (self.cutoff + 1) ** 2

    def index(self, n_a, n_b, e):
        return (np.asarray(n_a) * (self.cutoff + 1) + np.asarray(n_b)) * 2 + np.asarray(e)

    def labels(self, i):
        i = np.asarray(i)
        e = i % 2
        pair = i // 2
        return pair // (self.cutoff + 1), pair % (self.cutoff + 1), e


@dataclass(frozen=True)
class HamiltonianMatrix:
    basis: FockBasis
    matrix: scipy.sparse.csr_matrix
    k: float
    omega: float

    @property
    def dimension(self) -> int:
        return self.basis.dimension


def build_hamiltonian(k: float, omega: float, cutoff: int) -> HamiltonianMatrix:
    JTParams(k, omega)
    basis = FockBasis(cutoff)
    if basis.dimension > MAX_DIMENSION:
        raise MemoryError(f"dimension {basis.dimension} exceeds the budget of {MAX_DIMENSION}")
    N = cutoff
    na, nb, e = np.meshgrid(np.arange(N + 1), np.arange(N + 1), np.arange(2), indexing="ij")
    na, nb, e = na.ravel(), nb.ravel(), e.ravel()
    idx = basis.index(na, nb, e)
    g = omega * k / (2.0 * math.sqrt(2.0))

    rows = [idx]
    cols = [idx]
    vals = [0.5 * omega * (na + nb).astype(float)]

    # -(omega k / 2 sqrt2) (a + a^+) sigma_z
    sel = na >= 1
    lo = basis.index(na[sel] - 1, nb[sel], e[sel])
    v = -g * np.sqrt(na[sel]) * np.where(e[sel] == 0, 1.0, -1.0)
    rows += [lo, idx[sel]]
    cols += [idx[sel], lo]
    vals += [v, v]

    # +(omega k / 2 sqrt2) (b + b^+) sigma_x
    sel = nb >= 1
    lo = basis.index(na[sel], nb[sel] - 1, 1 - e[sel])
    v = g * np.sqrt(nb[sel])
    rows += [lo, idx[sel]]
    cols += [idx[sel], lo]
    vals += [v, v]

    H = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(basis.dimension, basis.dimension),
    ).tocsr()
    H.eliminate_zeros()
    H.sort_indices()
    return HamiltonianMatrix(basis, H, float(k), float(omega))


def ground_doublet(k: float, omega: float, cutoff: int, maxiter: int = 20000, tol: float = 1e-14):
    """Two lowest eigenvalues (E0 <= E1) and their eigenvectors (columns)."""
    ham = build_hamiltonian(k, omega, cutoff)
    if ham.dimension <= DENSE_LIMIT:
        w, v = scipy.linalg.eigh(ham.matrix.toarray(), subset_by_index=[0, 1])
    else:
        v0 = np.ones(ham.dimension) / math.sqrt(ham.dimension)
        try:
            w, v = scipy.sparse.linalg.eigsh(ham.matrix, k=2, which="SA", v0=v0,
                                             maxiter=maxiter, tol=tol)
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise RuntimeError(
                f"eigensolver did not converge within {maxiter} iterations"
            ) from exc
        order = np.argsort(w)
        w, v = w[order], v[:, order]
    return float(w[0]), float(w[1]), v


def hermite_functions(n_max: int, x: np.ndarray) -> np.ndarray:
    """Normalised oscillator eigenfunctions phi_0..phi_{n_max} at ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(1, n_max):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * x * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def fock_expand_guessed(k: float, cutoff: int, grid: RadialGrid | None = None):
    """Coefficients of the normalised Psi_- in the truncated Fock basis.

    The radial integral uses ``grid``; the angular integral is a trapezoid sum
    with enough points to be exact for the trigonometric polynomials involved.
    Returns ``(coefficients, captured_norm)``.
    """
    basis = FockBasis(cutoff)
    grid = grid if grid is not None else RadialGrid.for_coupling(k)
    if grid.q_max < k + 6.0:
        raise ValueError("radial truncation unsafe for the Fock expansion")
    n_phi = 2 * cutoff + 8
    phis = 2.0 * math.pi * np.arange(n_phi) / n_phi
    q = grid.nodes
    Q, P = np.meshgrid(q, phis, indexing="ij")
    # Psi_- = [C(q) (1, -i) + s S(q) e^{i phi} (1, i)] / sqrt2
    cosh_part, sinh_part = radial_profiles(q, k, scaled=True)
    fixed = cosh_part[:, None] / math.sqrt(2.0)
    turning = operator_sign() * sinh_part[:, None] * np.exp(1j * P) / math.sqrt(2.0)
    comps = [fixed + turning, -1j * fixed + 1j * turning]
    density = cosh_part ** 2 + sinh_part ** 2
    total = 2.0 * math.pi * math.fsum((grid.measure * density).tolist())
    w = grid.measure[:, None] * (2.0 * math.pi / n_phi)
    Fa = hermite_functions(cutoff, (Q * np.cos(P)).ravel())
    Fb = hermite_functions(cutoff, (Q * np.sin(P)).ravel())
    na, nb = np.meshgrid(np.arange(cutoff + 1), np.arange(cutoff + 1), indexing="ij")
    coeffs = np.zeros(basis.dimension, dtype=complex)
    for e, comp in enumerate(comps):
        block = (Fa * (w * comp).ravel()) @ Fb.T / math.sqrt(total)
        coeffs[basis.index(na.ravel(), nb.ravel(), e)] = block.ravel()
    captured = float(np.vdot(coeffs, coeffs).real)
    if captured < MIN_CAPTURED_NORM:
        warnings.warn(f"cutoff too small for this k (captured norm {captured:.6f})",
                      RuntimeWarning, stacklevel=2)
    return coeffs, captured


def guessed_energy(k: float, omega: float, cutoff: int, grid: RadialGrid | None = None) -> float:
    """Rayleigh quotient of the Fock-expanded guessed state."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        c, captured = fock_expand_guessed(k, cutoff, grid)
    if captured < MIN_CAPTURED_NORM:
        raise ValueError(f"cutoff {cutoff} too small for k={k}: captured norm {captured:.6f}")
    H = build_hamiltonian(k, omega, cutoff).matrix
    return float(np.vdot(c, H @ c).real / np.vdot(c, c).real)
