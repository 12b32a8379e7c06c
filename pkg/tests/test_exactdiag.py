import math

import numpy as np
import pytest
import scipy.sparse.linalg

from jtphase.exactdiag import (
    FockBasis,
    build_hamiltonian,
    fock_expand_guessed,
    ground_doublet,
    guessed_energy,
    hermite_functions,
)

# golden values from dense diagonalisation, stable to ~5e-15 between cutoff 20 and 30
E0_K1 = -0.3834845482003263
E0_K2 = -1.222871305247771


def test_basis_index_roundtrip():
    b = FockBasis(4)
    assert b.dimension == 2 * 25
    seen = {b.index(*b.labels(i)) for i in range(b.dimension)}
    assert seen == set(range(b.dimension))
    with pytest.raises(ValueError):
        FockBasis(0)


@pytest.mark.parametrize("k", [0.0, 0.7, 2.0])
def test_hamiltonian_hermitian_and_real(k):
    H = build_hamiltonian(k, 1.0, 6).matrix
    assert abs(H - H.getH()).max() <= 1e-15


def test_k0_spectrum_is_oscillator():
    e0, e1, _ = ground_doublet(0.0, 1.0, 8)
    assert e0 == 0.0 and e1 == 0.0
    H = build_hamiltonian(0.0, 1.0, 3).matrix.toarray()
    w = np.linalg.eigvalsh(H)
    assert np.allclose(np.unique(w.round(12)), 0.5 * np.arange(7))


@pytest.mark.parametrize("k,e0", [(1.0, E0_K1), (2.0, E0_K2)])
def test_ground_energy_golden(k, e0):
    a, b, _ = ground_doublet(k, 1.0, 20)
    assert a == pytest.approx(e0, abs=1e-12)
    assert b - a <= 1e-10


def test_ground_energy_scales_with_omega():
    a, _, _ = ground_doublet(1.0, 3.0, 16)
    b, _, _ = ground_doublet(1.0, 1.0, 16)
    assert a == pytest.approx(3.0 * b, rel=1e-12)


def test_e0_nonincreasing_in_cutoff():
    vals = [ground_doublet(2.0, 1.0, n)[0] for n in range(4, 22, 3)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_sparse_and_dense_agree():
    H = build_hamiltonian(1.5, 1.0, 12).matrix
    w = scipy.sparse.linalg.eigsh(H, k=2, which="SA", tol=1e-14)[0]
    e0, e1, _ = ground_doublet(1.5, 1.0, 12)
    assert np.allclose(np.sort(w), [e0, e1], atol=1e-11)


def test_memory_budget():
    with pytest.raises(MemoryError):
        build_hamiltonian(1.0, 1.0, 800)


def test_hermite_functions_orthonormal():
    x, w = np.polynomial.hermite.hermgauss(60)
    F = hermite_functions(12, x) * np.exp(0.5 * x * x)
    G = (F * w) @ F.T
    assert np.allclose(G, np.eye(13), atol=1e-12)


def test_fock_expansion_captured_norm():
    _, cap = fock_expand_guessed(1.0, 20)
    assert cap >= 0.9999
    assert cap <= 1.0 + 1e-10
    with pytest.warns(RuntimeWarning, match="cutoff too small"):
        fock_expand_guessed(4.0, 4)


def test_fock_expansion_k0_is_vacuum():
    c, cap = fock_expand_guessed(0.0, 6)
    b = FockBasis(6)
    assert abs(abs(c[b.index(0, 0, 0)]) ** 2 - 0.5) <= 1e-12
    assert abs(abs(c[b.index(0, 0, 1)]) ** 2 - 0.5) <= 1e-12
    assert cap == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0, 3.0])
def test_variational_bound(k):
    e0 = ground_doublet(k, 1.0, 24)[0]
    eg = guessed_energy(k, 1.0, 24)
    assert eg >= e0 - 1e-10
    # the guess is close but not exact
    assert eg - e0 <= 0.02


def test_guessed_energy_rejects_small_cutoff():
    with pytest.raises(ValueError):
        guessed_energy(4.0, 1.0, 4)
