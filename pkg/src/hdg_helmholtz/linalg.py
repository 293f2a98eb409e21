"""Dense and sparse complex linear solvers.

``dense_solve`` and ``batched_solve`` are plain partial-pivoting Gaussian
elimination. They only use elementwise arithmetic, so they also run on object
arrays of mpmath numbers (used by the extended-precision dispersion code).
The global trace systems go through SuperLU (COLAMD ordering) or a LAPACK
banded solve in 1D.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularMatrixError(ArithmeticError):
    """Pivot below the relative threshold during elimination."""

    def __init__(self, message: str, index: int | None = None, pivot_ratio: float | None = None):
        super().__init__(message)
        self.index = index
        self.pivot_ratio = pivot_ratio


class SparseSolverError(ArithmeticError):
    """Sparse factorization broke down; ``pivot`` is the offending column if known."""

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


def _abs(a: np.ndarray) -> np.ndarray:
    if a.dtype == object:
        return np.vectorize(lambda v: float(abs(v)), otypes=[float])(a)
    return np.abs(a)


def batched_solve(A: np.ndarray, B: np.ndarray, rtol: float = 1e-14):
    """Solve ``A[e] X[e] = B[e]`` for a stack of small square systems.

    Returns ``(X, pivot_ratio)`` where ``pivot_ratio[e]`` is the smallest
    |pivot| / max|A[e]|. Raises :class:`SingularMatrixError` naming the first
    system whose ratio falls below ``rtol``.
    """
    A = np.array(A, copy=True)
    B = np.array(B, copy=True)
    vec = B.ndim == A.ndim - 1
    if vec:
        B = B[..., None]
    if A.dtype != object:
        dt = np.result_type(A.dtype, B.dtype, np.complex128)
        A = A.astype(dt)
        B = B.astype(dt)
    nb, n, _ = A.shape
    scale = _abs(A).reshape(nb, -1).max(axis=1)
    scale = np.where(scale > 0, scale, 1.0)
    ratio = np.full(nb, np.inf)
    rows = np.arange(nb)
    for c in range(n):
        mag = _abs(A[:, c:, c])
        p = c + np.argmax(mag, axis=1)
        ratio = np.minimum(ratio, mag[rows, p - c] / scale)
        swap = p != c
        if np.any(swap):
            idx = rows[swap]
            tmp = A[idx, c, :].copy()
            A[idx, c, :] = A[idx, p[swap], :]
            A[idx, p[swap], :] = tmp
            tmp = B[idx, c, :].copy()
            B[idx, c, :] = B[idx, p[swap], :]
            B[idx, p[swap], :] = tmp
        bad = ratio < rtol
        if np.any(bad):
            e = int(np.argmax(bad))
            raise SingularMatrixError(
                f"system {e}: pivot ratio {ratio[e]:.3e} below {rtol:.1e}", index=e, pivot_ratio=float(ratio[e]))
        piv = A[:, c, c]
        if c + 1 < n:
            fac = A[:, c + 1:, c] / piv[:, None]
            A[:, c + 1:, c:] -= fac[:, :, None] * A[:, None, c, c:]
            B[:, c + 1:, :] -= fac[:, :, None] * B[:, None, c, :]
    X = np.empty_like(B)
    for c in range(n - 1, -1, -1):
        acc = B[:, c, :]
        if c + 1 < n:
            acc = acc - np.sum(A[:, c, c + 1:, None] * X[:, c + 1:, :], axis=1)
        X[:, c, :] = acc / A[:, c, c][:, None]
    if vec:
        X = X[..., 0]
    return X, ratio


def dense_solve(A, b, rtol: float = 1e-14):
    """Pivoted elimination for one small dense system; singular if a pivot < rtol * max|A|."""
    A = np.asarray(A)
    b = np.asarray(b)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    X, _ = batched_solve(A[None], b[None], rtol=rtol)
    return X[0]


def assemble_csr(rows, cols, vals, n: int) -> sp.csr_matrix:
    """COO triplets -> CSR with duplicates summed and indices sorted."""
    A = sp.coo_matrix((np.ravel(vals), (np.ravel(rows), np.ravel(cols))), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


class SparseLU:
    """SuperLU factorization with a pivot sanity check; reusable across right-hand sides."""

    def __init__(self, A, pivot_rtol: float = 1e-14):
        A = sp.csc_matrix(A, dtype=complex)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        try:
            self._lu = spla.splu(A, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SparseSolverError(f"sparse LU failed: {exc}") from exc
        d = np.abs(self._lu.U.diagonal())
        scale = abs(A).max() if A.nnz else 1.0
        small = d < pivot_rtol * scale
        if np.any(small):
            col = int(self._lu.perm_c[int(np.argmax(small))])
            raise SparseSolverError(f"near-zero pivot in column {col}", pivot=col)
        self.shape = A.shape

    def solve(self, b):
        return self._lu.solve(np.asarray(b, dtype=complex))


def sparse_solve(A, b):
    return SparseLU(A).solve(b)


def tridiagonal_solve(lower, diag, upper, b):
    """Banded LAPACK solve; ``lower[i] = A[i+1, i]``, ``upper[i] = A[i, i+1]``."""
    diag = np.asarray(diag, dtype=complex)
    n = len(diag)
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    try:
        return scipy.linalg.solve_banded((1, 1), ab, np.asarray(b, dtype=complex), check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise SparseSolverError(f"banded solve failed: {exc}") from exc


def residual(A, x, b) -> float:
    r = A @ x - b
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(r) / (nb if nb > 0 else 1.0))


def residual_tridiagonal(lower, diag, upper, b, x) -> float:
    """Relative residual of a tridiagonal system given by its three diagonals."""
    r = diag * x - b
    r[:-1] += upper * x[1:]
    r[1:] += lower * x[:-1]
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(r) / (nb if nb > 0 else 1.0))
