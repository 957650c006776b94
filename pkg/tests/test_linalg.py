import numpy as np
import pytest
from hypothesis import given, strategies as st

from oqw.linalg import (I2, SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Y, SIGMA_Z, DomainError, ShapeError,
                        adjoint, as_cmatrix, hermitian_eigen, is_hermitian, is_positive_semidefinite, matmul,
                        max_norm, min_eigenvalue, pauli_vector, psd_sqrt, spectral_norm, trace, unitary_exp)
from conftest import random_hermitian


def test_matmul_examples():
    assert np.allclose(matmul(I2, SIGMA_X), SIGMA_X)
    assert np.allclose(matmul(SIGMA_PLUS, SIGMA_MINUS), np.diag([0, 1]))
    assert np.allclose(matmul(SIGMA_X, SIGMA_Y), 1j * SIGMA_Z)


def test_matmul_shape_mismatch():
    with pytest.raises(ShapeError):
        matmul(I2, np.eye(3))
    with pytest.raises(ShapeError):
        as_cmatrix(np.ones((2, 3)))


def test_pauli_conventions():
    ket0, ket1 = np.array([1, 0]), np.array([0, 1])
    assert np.allclose(SIGMA_PLUS @ ket0, ket1)
    assert np.allclose(SIGMA_MINUS @ ket1, ket0)
    assert np.allclose(SIGMA_Z, np.outer(ket1, ket1) - np.outer(ket0, ket0))


def test_adjoint_and_trace_examples():
    assert np.array_equal(adjoint(SIGMA_MINUS), SIGMA_PLUS)
    assert np.array_equal(adjoint(SIGMA_Y), SIGMA_Y)
    assert np.array_equal(adjoint(1j * I2), -1j * I2)
    assert trace(I2) == 2
    assert trace(SIGMA_Z) == 0
    assert trace(0.5 * I2) == 1


def test_eigen_examples():
    e = hermitian_eigen(5.0 * SIGMA_Z)
    assert np.allclose(e.levels, [-5, 5])
    assert np.allclose(e.projectors[0], np.diag([1, 0]))
    assert np.allclose(e.projectors[1], np.diag([0, 1]))
    e = hermitian_eigen(I2, degeneracy_tol=0.3)
    assert len(e.levels) == 1 and np.isclose(e.levels[0], 1)
    assert np.allclose(e.projectors[0], I2)
    e = hermitian_eigen(SIGMA_X)
    assert np.allclose(e.levels, [-1, 1])
    for sign, p in zip((-1, 1), e.projectors):
        assert np.allclose(p, 0.5 * (I2 + sign * SIGMA_X))
        assert np.allclose(p @ p, p)


def test_eigen_rejects_non_hermitian():
    with pytest.raises(DomainError):
        hermitian_eigen(SIGMA_PLUS)


@given(st.integers(1, 8), st.integers(0, 2**31 - 1))
def test_eigen_random_hermitian(n, seed):
    h = random_hermitian(np.random.default_rng(seed), n)
    e = hermitian_eigen(h)
    assert max_norm(e.reconstruct() - h) < 1e-9
    assert max_norm(sum(e.projectors) - np.eye(n)) < 1e-9
    for a, pa in enumerate(e.projectors):
        assert is_hermitian(pa)
        assert max_norm(pa @ pa - pa) < 1e-9
        for b, pb in enumerate(e.projectors):
            if a != b:
                assert max_norm(pa @ pb) < 1e-9
    assert np.allclose(e.eigenvalues, np.linalg.eigvalsh(h), atol=1e-10)


def test_eigen_degenerate_cluster():
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    h = q @ np.diag([1.0, 1.0, 1.0, -2.0]) @ q.conj().T
    e = hermitian_eigen(h)
    assert len(e.levels) == 2
    assert np.isclose(np.trace(e.projectors[1]).real, 3)


@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_trace_cyclic_and_adjoint_involution(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    tab, tba = trace(matmul(a, b)), trace(matmul(b, a))
    assert abs(tab - tba) <= 1e-12 * max(1.0, abs(tab))
    assert np.array_equal(adjoint(adjoint(a)), a)


def test_psd_examples():
    plus = np.full((2, 2), 0.5)
    assert is_positive_semidefinite(0.5 * I2)
    assert not is_positive_semidefinite(SIGMA_Z)
    assert is_positive_semidefinite(plus)
    assert np.isclose(min_eigenvalue(SIGMA_Z), -1)


def test_psd_sqrt_and_exp(rng):
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    p = a @ a.conj().T
    r = psd_sqrt(p)
    assert max_norm(r @ r - p) < 1e-10
    h = random_hermitian(rng, 3)
    u = unitary_exp(h, 0.7)
    assert max_norm(u @ u.conj().T - np.eye(3)) < 1e-12
    w, v = np.linalg.eigh(h)
    assert max_norm(u - v @ np.diag(np.exp(-0.7j * w)) @ v.conj().T) < 1e-12
    with pytest.raises(DomainError):
        psd_sqrt(SIGMA_Z)


def test_spectral_norm_and_pauli_vector():
    assert np.isclose(spectral_norm(2 * SIGMA_MINUS), 2)
    assert np.allclose(pauli_vector((0, 1, 0)), SIGMA_Y)
    assert np.allclose(pauli_vector((1, 0, 0)), SIGMA_X)
