"""Projections and relative L2 error norms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import basis
from .fields import BrokenField, PolyField, exact_fields, solution_fields
from .forms import Integrator
from .hdg import _facet_vertex_table, facet_cell_bary
from .linalg import SingularMatrixError, batched_solve


def _edge_basis(s: np.ndarray, degree: int) -> np.ndarray:
    """Edge basis at canonical coordinates s (nq, 2): {mu_0, mu_1[, 4 mu_0 mu_1]} -> (nq, nb)."""
    cols = [s[:, 0], s[:, 1]]
    if degree == 2:
        cols.append(4 * s[:, 0] * s[:, 1])
    return np.column_stack(cols)


def edge_l2_projection(g, P: np.ndarray, degree: int, normals: np.ndarray | None = None,
                       k: float = 1.0, quad_degree: int = 10) -> np.ndarray:
    """L2 projection of ``g`` onto P_degree on each edge ``P`` (ne, 2, D).

    ``g`` is called as ``g(x)`` or, when ``normals`` (ne, D) is given, as
    ``g(x, n)``. Returns coefficients (ne, degree + 1) in the basis
    {mu_0, mu_1} (+ {4 mu_0 mu_1}) of the edge's barycentric coordinates.
    """
    if degree not in (1, 2):
        raise ValueError("degree must be 1 or 2")
    P = np.asarray(P, dtype=float)
    if P.ndim == 2:
        P = P[None]
    length = np.linalg.norm(P[:, 1] - P[:, 0], axis=-1)
    m = max(1, int(np.ceil(k * length.max())))
    rule = basis.quadrature("edge", quad_degree, m)
    s, w = rule.bary, rule.weights
    x = np.einsum("qa,ead->eqd", s, P)
    if normals is None:
        gx = np.asarray(g(x), dtype=complex)
    else:
        gx = np.asarray(g(x, np.asarray(normals)[:, None, :]), dtype=complex)
    phi = _edge_basis(s, degree)
    gram = np.einsum("q,qa,qb->ab", w, phi, phi)
    load = np.einsum("q,eq,qa->ea", w, gx, phi)
    return np.linalg.solve(gram, load.T).T


# ---------------------------------------------------------------------------
# HDG projection
# ---------------------------------------------------------------------------

class ProjectionError(ArithmeticError):
    """Local projection system singular."""


@dataclass
class ProjectionPair:
    """P1 nodal coefficients of Pi_1 u (nel, d+1) and Pi_2 q (nel, d+1, d)."""

    u: np.ndarray
    q: np.ndarray
    beta: complex

    def fields(self, mesh):
        return PolyField(mesh, self.u), PolyField(mesh, self.q)


def _projection_data(mesh, u: BrokenField, q: BrokenField, beta, degree, subdivisions):
    """Right-hand sides of the defining conditions, in projection row order."""
    d = mesh.dim
    integ = Integrator(mesh, degree, subdivisions)
    w = integ.cell_w
    rhs = [np.sum(w * integ.cell(u), axis=1)]
    qc = integ.cell(q)
    rhs += [np.sum(w * qc[..., c], axis=1) for c in range(d)]
    sb, sw = _facet_points(mesh, degree, subdivisions)
    lam = facet_cell_bary(mesh, sb)  # (nel, j, nq, i)
    nel = mesh.n_cells
    cells = np.repeat(np.arange(nel), d + 1)
    bary = lam.reshape(nel * (d + 1), -1, d + 1)
    uf = u.values(cells, bary).reshape(nel, d + 1, -1)
    qf = q.values(cells, bary).reshape(nel, d + 1, -1, d)
    qn = np.einsum("ejqc,ejc->ejq", qf, mesh.normals)
    fv = _facet_vertex_table(d)
    wm = mesh.cell_facet_measures[:, :, None] * sw[None, None]
    for j in range(d + 1):
        for a in range(d):
            mu = lam[:, j, :, fv[j, a]]
            rhs.append(np.sum(wm[:, j] * (qn[:, j] + beta * uf[:, j]) * mu, axis=1))
    return np.stack(rhs, axis=1)


def _facet_points(mesh, degree, subdivisions):
    if mesh.dim == 1:
        return np.ones((1, 1)), np.ones(1)
    r = basis.quadrature("edge", degree, subdivisions)
    return r.bary, r.weights


def projection_matrix(mesh, beta) -> np.ndarray:
    """Per-element matrix of the defining conditions acting on [u_i, q_{x,i}, (q_{y,i})]."""
    d = mesh.dim
    np1 = d + 1
    N = np1 * np1
    nel = mesh.n_cells
    vol = mesh.volumes
    E = basis.p1_local_matrices(mesh.geometry)["facet_mass"]
    Nrm = mesh.normals
    fv = _facet_vertex_table(d)
    M = np.zeros((nel, N, N), dtype=complex)
    M[:, 0, :np1] = (vol / np1)[:, None]
    for c in range(d):
        M[:, 1 + c, np1 * (c + 1):np1 * (c + 2)] = (vol / np1)[:, None]
    row = 1 + d
    for j in range(np1):
        for a in range(d):
            Em = E[:, j, :, fv[j, a]]  # (nel, i)
            M[:, row, :np1] = beta * Em
            for c in range(d):
                M[:, row, np1 * (c + 1):np1 * (c + 2)] = Nrm[:, j, c][:, None] * Em
            row += 1
    return M


def hdg_projection(beta: complex, u: BrokenField, q: BrokenField, mesh, degree: int = 10,
                   subdivisions: int | None = None) -> ProjectionPair:
    """Elementwise HDG projection of (u, q) with parameter ``beta``."""
    if beta == 0:
        raise ValueError("beta must be nonzero")
    if subdivisions is None:
        subdivisions = 1
    d = mesh.dim
    M = projection_matrix(mesh, beta)
    b = _projection_data(mesh, u, q, beta, degree, subdivisions)
    s = 1.0 / np.abs(M).max(axis=2)
    try:
        X, _ = batched_solve(M * s[:, :, None], b * s, rtol=1e-13)
    except SingularMatrixError as exc:
        raise ProjectionError(f"projection singular on element {exc.index}") from exc
    np1 = d + 1
    return ProjectionPair(X[:, :np1], np.stack([X[:, np1 * (c + 1):np1 * (c + 2)] for c in range(d)], axis=2),
                          complex(beta))


def projection_residual(pair: ProjectionPair, u: BrokenField, q: BrokenField, mesh,
                        degree: int = 10, subdivisions: int = 1) -> float:
    """max relative residual of the defining conditions, evaluated by quadrature."""
    pu, pq = pair.fields(mesh)
    lhs = _projection_data(mesh, pu, pq, pair.beta, degree, subdivisions)
    rhs = _projection_data(mesh, u, q, pair.beta, degree, subdivisions)
    scale = np.abs(rhs).max() or 1.0
    return float(np.abs(lhs - rhs).max() / scale)


# ---------------------------------------------------------------------------
# interpolants and means
# ---------------------------------------------------------------------------

def nodal_interpolant(mesh, fn) -> np.ndarray:
    """Vertex values per element: (nel, d+1) for scalars, (nel, d+1, d) for vectors."""
    return np.asarray(fn(mesh.cell_coords), dtype=complex)


def elementwise_mean(mesh, field: BrokenField, degree: int = 8, subdivisions: int = 1) -> np.ndarray:
    """Q_0 field = m_K field on each element."""
    integ = Integrator(mesh, degree, subdivisions)
    vals = integ.cell(field)
    w = integ.cell_w / mesh.volumes[:, None]
    if vals.ndim == 3:
        return np.einsum("eq,eqc->ec", w, vals)
    return np.sum(w * vals, axis=1)


# ---------------------------------------------------------------------------
# relative errors
# ---------------------------------------------------------------------------

@dataclass
class ErrorReport:
    e_u: float
    e_q: float
    e_uI: float
    e_qI: float
    e_ustar: float | None
    abs_u: float
    abs_q: float
    norm_u: float
    norm_q: float
    k: float
    h: float
    rule: str
    subdivisions: int


def _sq_norm(integ, field_a, field_b=None):
    a = integ.cell(field_a)
    if field_b is not None:
        a = a - integ.cell(field_b)
    a2 = np.abs(a) ** 2
    if a2.ndim == 3:
        a2 = a2.sum(axis=-1)
    return float(np.sum(integ.cell_w * a2))


def _norms(mesh, exact, uh, qh, ui, qi, ustar, degree, m):
    integ = Integrator(mesh, degree, m)
    U, Q = exact_fields(mesh, exact)
    out = [_sq_norm(integ, U), _sq_norm(integ, Q), _sq_norm(integ, U, uh), _sq_norm(integ, Q, qh),
           _sq_norm(integ, U, ui), _sq_norm(integ, Q, qi)]
    if ustar is not None:
        out.append(_sq_norm(integ, U, ustar))
    return np.sqrt(np.array(out))


def relative_errors(sol, exact, ustar: np.ndarray | None = None, degree: int = 6,
                    rtol: float = 1e-3, max_subdivisions: int = 256) -> ErrorReport:
    """Relative L2 errors of u_h, q_h, their nodal interpolants and optionally u*_h.

    For kh > 1 the element rule is applied on ceil(kh) sub-elements and the
    subdivision is doubled until no norm changes by more than ``rtol``.
    """
    mesh = sol.mesh
    k = sol.k
    uh, qh = solution_fields(sol)
    ui = PolyField(mesh, nodal_interpolant(mesh, exact.u))
    qi = PolyField(mesh, nodal_interpolant(mesh, exact.q))
    us = PolyField(mesh, ustar, 2) if ustar is not None else None
    kh = k * mesh.h
    m = max(1, int(np.ceil(kh)))
    vals = _norms(mesh, exact, uh, qh, ui, qi, us, degree, m)
    if kh > 1:
        while m < max_subdivisions:
            m *= 2
            new = _norms(mesh, exact, uh, qh, ui, qi, us, degree, m)
            change = np.max(np.abs(new - vals) / np.maximum(new, 1e-300))
            vals = new
            if change < rtol:
                break
    nu, nq = vals[0], vals[1]
    if nu == 0 or nq == 0:
        raise ValueError("exact solution has zero norm")
    tag = sol.rule.tag if sol.rule is not None else "explicit"
    return ErrorReport(vals[2] / nu, vals[3] / nq, vals[4] / nu, vals[5] / nq,
                       vals[6] / nu if ustar is not None else None,
                       vals[2], vals[3], nu, nq, k, mesh.h, tag, m)
