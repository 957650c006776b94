"""Small dense complex matrix helpers and a cyclic Jacobi Hermitian eigensolver.

Operators are plain ``numpy`` complex128 arrays of shape (N, N).  Pauli
conventions used everywhere in the package::

    basis order (|0>, |1>)
    sigma_plus  = |1><0|
    sigma_minus = |0><1|
    sigma_z     = |1><1| - |0><0|
    sigma_x, sigma_y with sigma_+ = (sigma_x + i sigma_y)/2
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    pass


class DomainError(ValueError):
    pass


I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
# sign of sigma_y fixed by sigma_x sigma_y = i sigma_z in this basis order
SIGMA_Y = np.array([[0, 1j], [-1j, 0]], dtype=complex)
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)


def as_cmatrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ShapeError(f"expected a square N x N matrix, got shape {m.shape}")
    return m


def matmul(a, b) -> np.ndarray:
    a, b = as_cmatrix(a), as_cmatrix(b)
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b


def adjoint(a) -> np.ndarray:
    return as_cmatrix(a).conj().T


def trace(a) -> complex:
    return complex(np.trace(as_cmatrix(a)))


def max_norm(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def is_hermitian(a, tol: float = 1e-10) -> bool:
    a = as_cmatrix(a)
    return max_norm(a - a.conj().T) <= tol * max(1.0, max_norm(a))


def pauli_vector(n) -> np.ndarray:
    """Return n . sigma for a real 3-vector n."""
    nx, ny, nz = (float(v) for v in n)
    return nx * SIGMA_X + ny * SIGMA_Y + nz * SIGMA_Z


def _jacobi_symmetric(a: np.ndarray, eps: float = 1e-15, max_sweeps: int = 100):
    """Cyclic Jacobi rotations on a real symmetric matrix.

    Returns (eigenvalues, eigenvectors as columns), unsorted.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if n == 1 or scale == 0.0:
        return np.diag(a).copy(), v
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.triu(a, 1) ** 2)))
        if off <= eps * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = 0.5 * math.atan2(2.0 * apq, a[q, q] - a[p, p])
                c, s = math.cos(theta), math.sin(theta)
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    return np.diag(a).copy(), v


@dataclass(frozen=True)
class HermitianEigen:
    """Spectral data of a Hermitian matrix.

    ``eigenvalues`` holds all N eigenvalues in ascending order;
    ``levels`` and ``projectors`` hold one entry per distinct (clustered)
    eigenvalue.
    """

    eigenvalues: tuple[float, ...]
    levels: tuple[float, ...]
    projectors: tuple[np.ndarray, ...]

    def reconstruct(self) -> np.ndarray:
        return sum(lam * p for lam, p in zip(self.levels, self.projectors))

    def apply(self, f) -> np.ndarray:
        """f(H) = sum_lambda f(lambda) Pi(lambda)."""
        return sum(f(lam) * p for lam, p in zip(self.levels, self.projectors))


def default_degeneracy_tol(eigenvalues) -> float:
    ev = np.asarray(eigenvalues, dtype=float)
    spread = float(ev.max() - ev.min()) if ev.size else 0.0
    return 1e-9 * (spread if spread > 0 else 1.0)


def hermitian_eigen(a, degeneracy_tol: float | None = None) -> HermitianEigen:
    """Eigen-decompose a Hermitian matrix into clustered spectral projectors.

    The complex N x N problem is embedded as the real symmetric 2N x 2N
    matrix [[Re A, -Im A], [Im A, Re A]], diagonalised by cyclic Jacobi.
    Each eigenvalue then appears twice, and the real projector onto a
    cluster has the block form [[Re P, -Im P], [Im P, Re P]].
    """
    a = as_cmatrix(a)
    if not is_hermitian(a, 1e-10):
        raise DomainError("hermitian_eigen requires a Hermitian matrix")
    a = 0.5 * (a + a.conj().T)
    n = a.shape[0]
    emb = np.block([[a.real, -a.imag], [a.imag, a.real]])
    w, v = _jacobi_symmetric(emb)
    order = np.argsort(w, kind="stable")
    w, v = w[order], v[:, order]
    eigenvalues = 0.5 * (w[0::2] + w[1::2])
    tol = default_degeneracy_tol(eigenvalues) if degeneracy_tol is None else degeneracy_tol

    clusters: list[list[int]] = [[0]]
    for k in range(1, 2 * n):
        if w[k] - w[clusters[-1][-1]] < tol or (k % 2 == 1 and len(clusters[-1]) % 2 == 1):
            clusters[-1].append(k)
        else:
            clusters.append([k])
    levels, projectors = [], []
    for idx in clusters:
        vecs = v[:, idx]
        p_real = vecs @ vecs.T
        proj = p_real[:n, :n] + 1j * p_real[n:, :n]
        levels.append(float(np.mean(w[idx])))
        projectors.append(0.5 * (proj + proj.conj().T))
    return HermitianEigen(tuple(float(x) for x in eigenvalues), tuple(levels), tuple(projectors))


def is_positive_semidefinite(a, tol: float = 1e-9) -> bool:
    a = as_cmatrix(a)
    if not is_hermitian(a, max(tol, 1e-10)):
        return False
    return min(hermitian_eigen(a).eigenvalues) >= -tol


def min_eigenvalue(a) -> float:
    """Smallest eigenvalue of the Hermitian part of ``a``."""
    a = as_cmatrix(a)
    return float(min(hermitian_eigen(0.5 * (a + a.conj().T)).eigenvalues))


def spectral_norm(a) -> float:
    a = as_cmatrix(a)
    return math.sqrt(max(0.0, max(hermitian_eigen(a.conj().T @ a).eigenvalues)))


def psd_sqrt(a) -> np.ndarray:
    """Principal square root of a positive semidefinite Hermitian matrix."""
    eig = hermitian_eigen(a)
    if eig.levels[0] < -1e-12:
        raise DomainError(f"matrix is not positive semidefinite (min eigenvalue {eig.levels[0]:.3e})")
    return eig.apply(lambda lam: math.sqrt(max(lam, 0.0)))


def unitary_exp(h, t: float) -> np.ndarray:
    """exp(-i t H) for Hermitian H."""
    return hermitian_eigen(h).apply(lambda lam: complex(math.cos(t * lam), -math.sin(t * lam)))
