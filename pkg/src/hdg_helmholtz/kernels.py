"""Backend selection for the 1D solve.

The compiled kernel (``_hdg1d``) is used when it was built; set
``HDG_HELMHOLTZ_KERNEL=numpy`` to force the pure numpy implementation.
"""
from __future__ import annotations

import os

import numpy as np

from .linalg import tridiagonal_solve

try:
    from ._hdg1d import solve_1d as _compiled_solve_1d
except ImportError:  # extension not built
    _compiled_solve_1d = None

BACKEND = "compiled" if _compiled_solve_1d is not None and os.environ.get(
    "HDG_HELMHOLTZ_KERNEL", "").lower() != "numpy" else "numpy"


def numpy_solve_1d(x, k, tau, F0, F1, g_left, g_right):
    """Reference implementation of :func:`solve_1d` built on the generic element blocks."""
    from .basis import simplex_geometry
    from .hdg import local_blocks
    from .linalg import SingularMatrixError, batched_solve

    x = np.asarray(x, dtype=float)
    n = len(x) - 1
    X = np.stack([x[:-1], x[1:]], axis=1)[:, :, None]
    geom = simplex_geometry(X)
    # local facet 0 is the right node, facet 1 the left node
    tau_cell = np.stack([tau[1:], tau[:-1]], axis=1)
    A, B, C, D = local_blocks(geom, k, tau_cell)
    F = np.zeros((n, 4), dtype=complex)
    F[:, 0], F[:, 1] = F0, F1
    s = 1.0 / np.abs(A).max(axis=2)
    rhs = np.concatenate([B, F[:, :, None]], axis=2) * s[:, :, None]
    try:
        Y, _ = batched_solve(A * s[:, :, None], rhs, rtol=1e-12)
    except SingularMatrixError as exc:
        return exc.index, None, None, None, None
    S = C @ Y[:, :, :2] - D  # slots: 0 right node, 1 left node
    load = np.einsum("etn,en->et", C, Y[:, :, 2])
    diag = np.zeros(n + 1, dtype=complex)
    np.add.at(diag, np.arange(n), S[:, 1, 1])
    np.add.at(diag, np.arange(1, n + 1), S[:, 0, 0])
    upper = S[:, 1, 0].copy()
    lower = S[:, 0, 1].copy()
    rhs_g = np.zeros(n + 1, dtype=complex)
    np.add.at(rhs_g, np.arange(n), load[:, 1])
    np.add.at(rhs_g, np.arange(1, n + 1), load[:, 0])
    diag[0] += 1j * k
    diag[n] += 1j * k
    rhs_g[0] += g_left
    rhs_g[n] += g_right
    uhat = tridiagonal_solve(lower, diag, upper, rhs_g)
    uloc = np.stack([uhat[1:], uhat[:-1]], axis=1)
    xl = Y[:, :, 2] - np.einsum("ent,et->en", Y[:, :, :2], uloc)
    return -1, uhat, xl[:, :2], xl[:, 2:], (lower, diag, upper, rhs_g)


def solve_1d(x, k, tau, F0, F1, g_left, g_right, backend: str | None = None):
    """Condense, assemble, solve and recover on the 1D grid ``x``.

    Returns ``(status, uhat, u, q, (lower, diag, upper, rhs))``; ``status`` is
    -1 on success or the index of the first singular element.
    """
    backend = backend or BACKEND
    args = (np.ascontiguousarray(x, dtype=float), float(k), np.ascontiguousarray(tau, dtype=complex),
            np.ascontiguousarray(F0, dtype=complex), np.ascontiguousarray(F1, dtype=complex),
            complex(g_left), complex(g_right))
    if backend == "compiled":
        if _compiled_solve_1d is None:
            raise RuntimeError("compiled kernel not available")
        return _compiled_solve_1d(*args)
    if backend != "numpy":
        raise ValueError(f"unknown backend {backend!r}")
    return numpy_solve_1d(*args)
