"""Reference-simplex quadrature and P1/P2 local matrices.

Quadrature points are stored in barycentric coordinates with weights that sum
to one, so ``integral_K f = |K| * sum_q w_q f(x_q)`` for any simplex ``K``.

The geometry and P1 matrix builders only use elementwise arithmetic, so they
accept object arrays of mpmath numbers as well as float arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class SingularElementError(ArithmeticError):
    """Element measure below 1e-300."""


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points (nq, d+1) and weights (nq,) summing to 1."""

    kind: str
    degree: int
    bary: np.ndarray
    weights: np.ndarray

    @property
    def dim(self) -> int:
        return self.bary.shape[1] - 1

    def points(self, coords: np.ndarray) -> np.ndarray:
        """Physical points for simplices ``coords`` (..., d+1, D) -> (..., nq, D)."""
        return np.einsum("qi,...id->...qd", self.bary, coords)

    def integrate(self, f, coords: np.ndarray):
        """Integral of ``f(points)`` over the simplex with vertices ``coords``."""
        coords = np.asarray(coords, dtype=float)
        x = self.points(coords)
        meas = simplex_measure(coords)
        return meas * np.sum(self.weights * f(x), axis=-1)


def simplex_measure(coords: np.ndarray) -> np.ndarray:
    """Length/area of simplices embedded in R^D, coords (..., d+1, D)."""
    coords = np.asarray(coords, dtype=float)
    e = coords[..., 1:, :] - coords[..., :1, :]
    gram = np.einsum("...id,...jd->...ij", e, e)
    d = e.shape[-2]
    return np.sqrt(np.abs(np.linalg.det(gram))) / (1.0 if d == 1 else 2.0)


_KINDS = {"interval": 1, "edge": 1, "triangle": 2}
MAX_DEGREE = 40


@lru_cache(maxsize=None)
def _base_rule(dim: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    if dim == 1:
        n = max(1, -(-(degree + 1) // 2))
        x, w = np.polynomial.legendre.leggauss(n)
        s = (x + 1) / 2
        return np.column_stack([1 - s, s]), w / 2
    # collapsed (Duffy) tensor Gauss rule; the (1-s) Jacobian adds one degree in s
    n = max(1, -(-(degree + 2) // 2))
    x, w = np.polynomial.legendre.leggauss(n)
    s = (x + 1) / 2
    ws = w / 2
    S, T = np.meshgrid(s, s, indexing="ij")
    W = np.outer(ws, ws) * (1 - S)
    l1 = S.ravel()
    l2 = ((1 - S) * T).ravel()
    bary = np.column_stack([1 - l1 - l2, l1, l2])
    return bary, 2.0 * W.ravel()


@lru_cache(maxsize=None)
def _subsimplices(dim: int, m: int) -> list[np.ndarray]:
    """Barycentric vertices of the m-fold uniform refinement of the reference simplex."""
    if dim == 1:
        return [np.array([[1 - i / m, i / m], [1 - (i + 1) / m, (i + 1) / m]]) for i in range(m)]

    def b(i, j):
        return np.array([1 - (i + j) / m, i / m, j / m])

    out = []
    for i in range(m):
        for j in range(m - i):
            out.append(np.array([b(i, j), b(i + 1, j), b(i, j + 1)]))
            if i + j + 1 < m:
                out.append(np.array([b(i + 1, j), b(i + 1, j + 1), b(i, j + 1)]))
    return out


def quadrature(kind: str, degree: int, subdivisions: int = 1) -> QuadratureRule:
    """Rule exact for polynomials of total degree ``degree`` on each sub-simplex."""
    if kind not in _KINDS:
        raise ValueError(f"unknown quadrature kind {kind!r}")
    if int(degree) != degree or not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported exactness degree {degree} (0..{MAX_DEGREE})")
    if subdivisions < 1:
        raise ValueError("subdivisions must be >= 1")
    return _quadrature(kind, int(degree), int(subdivisions))


@lru_cache(maxsize=None)
def _quadrature(kind: str, degree: int, subdivisions: int) -> QuadratureRule:
    dim = _KINDS[kind]
    bary, w = _base_rule(dim, degree)
    if subdivisions > 1:
        subs = _subsimplices(dim, subdivisions)
        bary = np.concatenate([bary @ sv for sv in subs])
        w = np.concatenate([w / len(subs)] * len(subs))
    bary.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(kind, degree, bary, w)


def cell_rule(dim: int, degree: int, subdivisions: int = 1) -> QuadratureRule:
    return quadrature("interval" if dim == 1 else "triangle", degree, subdivisions)


# ---------------------------------------------------------------------------
# geometry and P1 matrices (generic arithmetic)
# ---------------------------------------------------------------------------

def _sqrt(x):
    # object arrays hold mpmath numbers; ** 0.5 keeps their precision
    return x ** 0.5 if x.dtype == object else np.sqrt(x)


def simplex_geometry(X: np.ndarray) -> dict[str, np.ndarray]:
    """Measure, barycentric gradients, facet normals and facet measures.

    ``X`` has shape (nel, d+1, d). Facet ``j`` is the one opposite vertex ``j``;
    its outward normal is ``-grad(lambda_j) / |grad(lambda_j)|``.
    """
    nel, np1, d = X.shape
    if d == 1:
        vol = X[:, 1, 0] - X[:, 0, 0]
    elif d == 2:
        e1 = X[:, 1] - X[:, 0]
        e2 = X[:, 2] - X[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        vol = det / 2
    else:
        raise ValueError(f"unsupported dimension {d}")
    if X.dtype != object:
        bad = np.abs(vol) < 1e-300
        if np.any(bad):
            raise SingularElementError(f"degenerate element {int(np.argmax(bad))}")
        if np.any(vol < 0):
            raise SingularElementError("negatively oriented element")
    G = np.empty((nel, np1, d), dtype=X.dtype)
    if d == 1:
        G[:, 0, 0] = -1 / vol
        G[:, 1, 0] = 1 / vol
    else:
        G[:, 1, 0] = e2[:, 1] / det
        G[:, 1, 1] = -e2[:, 0] / det
        G[:, 2, 0] = -e1[:, 1] / det
        G[:, 2, 1] = e1[:, 0] / det
        G[:, 0] = -(G[:, 1] + G[:, 2])
    gnorm = _sqrt(np.sum(G * G, axis=2))
    normals = -G / gnorm[:, :, None]
    fmeas = d * vol[:, None] * gnorm
    return {"volume": vol, "grads": G, "normals": normals, "facet_measures": fmeas}


def p1_local_matrices(geom: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """P1 element matrices on simplices with vertex (barycentric) basis.

    mass[i, j]        = (lambda_j, lambda_i)_K
    stiffness[i, j]   = (grad lambda_j, grad lambda_i)_K
    gint[i, j, c]     = (lambda_i, d_c lambda_j)_K
    facet_mass[j,i,m] = <lambda_m, lambda_i>_{F_j} (zero unless i, m on F_j)
    """
    vol = geom["volume"]
    G = geom["grads"]
    fm = geom["facet_measures"]
    nel, np1, d = G.shape
    eye = np.eye(np1)
    mass = (vol / ((d + 1) * (d + 2)))[:, None, None] * (1 + eye)[None]
    stiff = vol[:, None, None] * np.sum(G[:, :, None, :] * G[:, None, :, :], axis=3)
    gint = (vol / (d + 1))[:, None, None, None] * np.broadcast_to(G[:, None, :, :], (nel, np1, np1, d))
    on = 1.0 - eye  # on[j, i]: vertex i lies on facet j
    pattern = on[:, :, None] * on[:, None, :] * (1 + eye)[None]  # (j, i, m)
    fmass = (fm / (d * (d + 1)))[:, :, None, None] * pattern[None]
    return {"mass": mass, "stiffness": stiff, "gint": gint, "facet_mass": fmass}


# ---------------------------------------------------------------------------
# P2 hierarchical basis: {1, lambda_1..lambda_d, lambda_i lambda_j (i<j)}
# ---------------------------------------------------------------------------

def p2_pairs(dim: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(dim + 1) for j in range(i + 1, dim + 1)]


def p2_size(dim: int) -> int:
    return (dim + 1) * (dim + 2) // 2


def p2_values(bary: np.ndarray) -> np.ndarray:
    """P2 basis at barycentric points (..., d+1) -> (..., nb)."""
    d = bary.shape[-1] - 1
    cols = [np.ones(bary.shape[:-1])] + [bary[..., i] for i in range(1, d + 1)]
    cols += [bary[..., i] * bary[..., j] for i, j in p2_pairs(d)]
    return np.stack(cols, axis=-1)


def p2_gradients(bary: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Physical gradients of the P2 basis.

    ``bary`` is (nq, d+1) shared by all elements or (nel, nq, d+1);
    ``G`` is (nel, d+1, d). Returns (nel, nq, nb, d).
    """
    nel, np1, d = G.shape
    if bary.ndim == 2:
        bary = np.broadcast_to(bary, (nel,) + bary.shape)
    nq = bary.shape[1]
    out = np.zeros((nel, nq, p2_size(d), d))
    for i in range(1, d + 1):
        out[:, :, i, :] = G[:, None, i, :]
    for col, (i, j) in enumerate(p2_pairs(d), start=d + 1):
        out[:, :, col, :] = (bary[:, :, j, None] * G[:, None, i, :]
                             + bary[:, :, i, None] * G[:, None, j, :])
    return out


def p2_local_matrices(geom: dict[str, np.ndarray], degree: int = 4) -> dict[str, np.ndarray]:
    """Mass and stiffness of the P2 hierarchical basis plus basis means."""
    G = np.asarray(geom["grads"], dtype=float)
    vol = np.asarray(geom["volume"], dtype=float)
    d = G.shape[2]
    rule = cell_rule(d, degree)
    phi = p2_values(rule.bary)
    dphi = p2_gradients(rule.bary, G)
    w = rule.weights
    mass = vol[:, None, None] * np.einsum("q,qa,qb->ab", w, phi, phi)[None]
    stiff = vol[:, None, None] * np.einsum("q,eqad,eqbd->eab", w, dphi, dphi)
    means = np.broadcast_to(w @ phi, (len(vol), phi.shape[1]))
    return {"mass": mass, "stiffness": stiff, "means": means}
