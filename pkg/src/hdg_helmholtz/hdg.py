"""Linear HDG discretization of -div(grad u) - k^2 u = f with impedance data.

With q = -grad u, on each simplex K the local unknowns are the P1 nodal
values of u_h and of each component of q_h; the global unknowns are the
P1 trace values û_h on facets (one per node in 1D, two per edge in 2D).

Local equations, for all P1 test functions v and P1 vector fields r:

    (q, r)_K - (u, div r)_K + <û, r.n>_dK                        = 0
    -(q, grad v)_K - k^2 (u, v)_K + <q.n + tau (u - û), v>_dK    = (f, v)_K

Transmission: the flux q̂.n = q.n + tau (u - û) is single valued on interior
facets and satisfies -q̂.n + i k û = g_h on the boundary. Eliminating (u, q)
per element gives the trace system

    K û = rhs,   K = sum_K (C A^{-1} B - D) + i k M_bdry,
                 rhs = <g, mu>_bdry + sum_K C A^{-1} F.

Local unknown order: x = [u_0..u_d, q_{x,0}..q_{x,d}, (q_{y,0}..q_{y,d})].
Local trace order: facet j (opposite vertex j), then facet vertex a.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import basis
from .linalg import SingularMatrixError, SparseLU, assemble_csr, batched_solve, tridiagonal_solve
from .mesh import Mesh1D, SimplexMesh
from .penalty import PenaltyRule


class ElementSingularError(ArithmeticError):
    """Local (u, q) block numerically singular (discrete resonance)."""

    def __init__(self, message: str, element: int, kh: float):
        super().__init__(message)
        self.element = element
        self.kh = kh


class HDGSolveError(RuntimeError):
    """Failure of the global solve, with the run context in the message."""


ELEMENT_PIVOT_RTOL = 1e-12


def _facet_vertex_table(d: int) -> np.ndarray:
    """fv[j, a] = local vertex index of the a-th vertex of facet j."""
    return np.array([[i for i in range(d + 1) if i != j] for j in range(d + 1)], dtype=int)


@dataclass
class CondensedElements:
    """Per-element blocks of the local system A x + B û = F and flux rows C x + D û."""

    A: np.ndarray  # (nel, N, N)
    B: np.ndarray  # (nel, N, T)
    C: np.ndarray  # (nel, T, N)
    D: np.ndarray  # (nel, T, T)
    F: np.ndarray  # (nel, N)
    AinvB: np.ndarray  # (nel, N, T)
    AinvF: np.ndarray  # (nel, N)

    @property
    def schur(self) -> np.ndarray:
        """Element trace matrices C A^{-1} B - D, (nel, T, T)."""
        return self.C @ self.AinvB - self.D

    @property
    def load(self) -> np.ndarray:
        return np.einsum("etn,en->et", self.C, self.AinvF)

    def recover(self, uhat_local: np.ndarray) -> np.ndarray:
        """Interior unknowns x = A^{-1}(F - B û)."""
        return self.AinvF - np.einsum("ent,et->en", self.AinvB, uhat_local)


def local_blocks(geom: dict, k, tau_cell: np.ndarray):
    """Element blocks (A, B, C, D) for geometry ``geom`` and per-facet ``tau_cell`` (nel, d+1).

    Only elementwise arithmetic is used, so object arrays of mpmath numbers
    are accepted (the Bloch analysis relies on this).
    """
    mats = basis.p1_local_matrices(geom)
    M, gint, E = mats["mass"], mats["gint"], mats["facet_mass"]
    Nrm = geom["normals"]
    nel, np1, d = Nrm.shape
    N = np1 * (d + 1)
    T = np1 * d
    fv = _facet_vertex_table(d)
    dtype = object if M.dtype == object else complex
    A = np.zeros((nel, N, N), dtype=dtype)
    B = np.zeros((nel, N, T), dtype=dtype)
    C = np.zeros((nel, T, N), dtype=dtype)
    D = np.zeros((nel, T, T), dtype=dtype)
    if dtype == object:
        for arr in (A, B, C, D):
            arr[...] = 0
    U = slice(0, np1)

    def Q(c):
        return slice(np1 * (c + 1), np1 * (c + 2))

    # (q, r) - (u, div r) + <û, r.n>
    for c in range(d):
        A[:, Q(c), Q(c)] += M
        A[:, Q(c), U] -= np.transpose(gint[:, :, :, c], (0, 2, 1))
    # -(q, grad v) - k^2 (u, v)
    for c in range(d):
        A[:, U, Q(c)] -= np.transpose(gint[:, :, :, c], (0, 2, 1))
    A[:, U, U] -= k * k * M
    for j in range(np1):
        Ej = E[:, j]  # (nel, m, i) facet mass on facet j
        tj = tau_cell[:, j]
        A[:, U, U] += tj[:, None, None] * Ej
        for c in range(d):
            A[:, U, Q(c)] += Nrm[:, j, c][:, None, None] * Ej
        for a in range(d):
            col = j * d + a
            m_a = fv[j, a]
            B[:, U, col] -= tj[:, None] * Ej[:, :, m_a]
            for c in range(d):
                B[:, Q(c), col] += Nrm[:, j, c][:, None] * Ej[:, :, m_a]
            # flux rows: <q.n + tau (u - û), mu_a>_{F_j}
            row = col
            C[:, row, U] = tj[:, None] * Ej[:, m_a, :]
            for c in range(d):
                C[:, row, Q(c)] = Nrm[:, j, c][:, None] * Ej[:, m_a, :]
            for b in range(d):
                D[:, row, j * d + b] = -tj * Ej[:, m_a, fv[j, b]]
    return A, B, C, D


def condense(mesh: SimplexMesh, k: float, tau_cell: np.ndarray, F: np.ndarray | None = None,
             geom: dict | None = None) -> CondensedElements:
    """Eliminate (u, q) elementwise; raises :class:`ElementSingularError` on resonance."""
    geom = mesh.geometry if geom is None else geom
    A, B, C, D = local_blocks(geom, k, tau_cell)
    nel, N, T = B.shape
    if F is None:
        F = np.zeros((nel, N), dtype=complex)
    # row equilibration keeps the pivot test meaningful across scales of h and tau
    s = 1.0 / np.abs(A).max(axis=2)
    rhs = np.concatenate([B, F[:, :, None]], axis=2) * s[:, :, None]
    try:
        X, _ = batched_solve(A * s[:, :, None], rhs, rtol=ELEMENT_PIVOT_RTOL)
    except SingularMatrixError as exc:
        e = exc.index
        kh = float(k * mesh.cell_diameters[e])
        raise ElementSingularError(
            f"local HDG block singular on element {e} (k h_K = {kh:.6g}): {exc}", e, kh) from exc
    return CondensedElements(A, B, C, D, F, X[:, :, :T], X[:, :, T])


def assemble_element(coords: np.ndarray, k: float, tau, load: np.ndarray | None = None) -> CondensedElements:
    """Condensed blocks of a single element with vertices ``coords`` (d+1, d).

    ``tau`` is a scalar or one value per local facet (facet j opposite vertex j).
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    d = coords.shape[1]
    mesh = SimplexMesh(coords, np.arange(d + 1)[None])
    tau_cell = np.broadcast_to(np.asarray(tau, dtype=complex), (d + 1,))[None]
    return condense(mesh, k, tau_cell, None if load is None else np.asarray(load, dtype=complex)[None])


# ---------------------------------------------------------------------------
# data integrals
# ---------------------------------------------------------------------------

def _subdivisions(k: float, h: float) -> int:
    return max(1, int(np.ceil(k * h)))


def element_load(mesh: SimplexMesh, f: Callable | None, k: float, degree: int = 6) -> np.ndarray:
    """(f, lambda_m)_K for all elements, placed in the u rows of the local load."""
    d = mesh.dim
    N = (d + 1) * (d + 1)
    F = np.zeros((mesh.n_cells, N), dtype=complex)
    if f is None:
        return F
    rule = basis.cell_rule(d, degree, _subdivisions(k, mesh.h))
    x = rule.points(mesh.cell_coords)  # (nel, nq, d)
    fx = np.asarray(f(x), dtype=complex)
    F[:, :d + 1] = mesh.volumes[:, None] * np.einsum("q,eq,qm->em", rule.weights, fx, rule.bary)
    return F


def boundary_facets(mesh: SimplexMesh):
    """Boundary facet ids with their cell and local index."""
    bf = np.flatnonzero(mesh.boundary)
    cells = mesh.facet_cells[bf, 0]
    loc = mesh.facet_local[bf, 0]
    return bf, cells, loc


def facet_rule(mesh: SimplexMesh, k: float, degree: int = 10):
    """Quadrature on facets in canonical facet barycentric coordinates."""
    if mesh.dim == 1:
        return np.ones((1, 1)), np.ones(1)
    rule = basis.quadrature("edge", degree, _subdivisions(k, float(mesh.facet_measures.max())))
    return rule.bary, rule.weights


def boundary_projection(mesh: SimplexMesh, g: Callable, k: float, degree: int = 1,
                        quad_degree: int = 10) -> np.ndarray:
    """Coefficients of the facetwise L2 projection of g on boundary facets.

    2D: (nb, degree + 1) in the basis {mu_lo, mu_hi} (+ {4 mu_lo mu_hi} for
    degree 2), with facet vertices in canonical order. 1D: (nb, 1) point values.
    """
    bf, cells, loc = boundary_facets(mesh)
    n = mesh.normals[cells, loc]  # (nb, d)
    if mesh.dim == 1:
        x = mesh.vertices[mesh.facets[bf]]  # (nb, 1, 1)
        return np.asarray(g(x[:, 0], n), dtype=complex)[:, None]
    from .projections import edge_l2_projection
    P = mesh.vertices[mesh.facets[bf]]  # (nb, 2, 2)
    return edge_l2_projection(g, P, degree, normals=n, k=k, quad_degree=quad_degree)


def boundary_load(mesh: SimplexMesh, g: Callable, k: float, quad_degree: int = 10) -> np.ndarray:
    """<g, mu>_facet for boundary trace dofs, shape (nb, d) in canonical order."""
    bf, cells, loc = boundary_facets(mesh)
    n = mesh.normals[cells, loc]
    if mesh.dim == 1:
        x = mesh.vertices[mesh.facets[bf]]
        return np.asarray(g(x[:, 0], n), dtype=complex)[:, None]
    sb, w = facet_rule(mesh, k, quad_degree)
    P = mesh.vertices[mesh.facets[bf]]  # (nb, 2, 2)
    x = np.einsum("qa,fad->fqd", sb, P)
    gx = np.asarray(g(x, n[:, None, :]), dtype=complex)
    return mesh.facet_measures[bf][:, None] * np.einsum("q,fq,qa->fa", w, gx, sb)


# ---------------------------------------------------------------------------
# trace system
# ---------------------------------------------------------------------------

@dataclass
class TraceSystem:
    """Condensed system over trace dofs plus what recovery needs."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dof_map: np.ndarray  # (nel, T) global trace dof per local trace slot
    elements: CondensedElements
    tau: np.ndarray  # per facet
    k: float


def facet_tau(mesh: SimplexMesh, k: float, rule: PenaltyRule) -> np.ndarray:
    return np.asarray(rule(k, mesh.facet_sizes), dtype=complex).reshape(mesh.n_facets)


def assemble_trace_system(mesh: SimplexMesh, k: float, rule: PenaltyRule | np.ndarray,
                          f: Callable | None, g: Callable, quad_degree: int = 10) -> TraceSystem:
    """Condense all elements and sum their trace contributions.

    ``rule`` may also be an explicit per-facet array of tau values.
    """
    tau = facet_tau(mesh, k, rule) if isinstance(rule, PenaltyRule) else np.asarray(rule, dtype=complex)
    tau_cell = tau[mesh.cell_facets]
    F = element_load(mesh, f, k)
    el = condense(mesh, k, tau_cell, F)
    dm = mesh.trace_dof_map
    nel, T = dm.shape
    S = el.schur
    rows = np.repeat(dm, T, axis=1)
    cols = np.tile(dm, (1, T))
    n = mesh.n_trace_dofs
    d = mesh.dim
    # impedance mass on boundary facets
    bf, _, _ = boundary_facets(mesh)
    fm = mesh.facet_measures[bf]
    local = (1 + np.eye(d)) / (d * (d + 1))
    bdofs = d * bf[:, None] + np.arange(d)[None, :] if d > 1 else bf[:, None]
    brow = np.repeat(bdofs, d, axis=1)
    bcol = np.tile(bdofs, (1, d))
    bval = 1j * k * fm[:, None] * local.reshape(1, -1)
    K = assemble_csr(np.concatenate([rows.ravel(), brow.ravel()]),
                     np.concatenate([cols.ravel(), bcol.ravel()]),
                     np.concatenate([S.ravel(), bval.ravel()]), n)
    rhs = np.zeros(n, dtype=complex)
    np.add.at(rhs, dm.ravel(), el.load.ravel())
    np.add.at(rhs, bdofs.ravel(), boundary_load(mesh, g, k, quad_degree).ravel())
    return TraceSystem(K, rhs, dm, el, tau, k)


def solve_trace_system(ts: TraceSystem, dim: int) -> np.ndarray:
    K = ts.matrix
    if dim == 1:
        lower = K.diagonal(-1)
        upper = K.diagonal(1)
        return tridiagonal_solve(lower, K.diagonal(), upper, ts.rhs)
    return SparseLU(K).solve(ts.rhs)


# ---------------------------------------------------------------------------
# solution
# ---------------------------------------------------------------------------

@dataclass
class HDGSolution:
    """Per-element P1 nodal values of u_h (nel, d+1) and q_h (nel, d+1, d), traces û_h."""

    mesh: SimplexMesh
    k: float
    rule: PenaltyRule | None
    tau: np.ndarray
    u: np.ndarray
    q: np.ndarray
    uhat: np.ndarray
    gh_degree: int = 1
    gh: np.ndarray | None = None  # boundary projection coefficients (see boundary_projection)
    residual: float = 0.0
    outside_theory: bool = False
    system: TraceSystem | None = field(default=None, repr=False)

    @property
    def uhat_local(self) -> np.ndarray:
        return self.uhat[self.mesh.trace_dof_map]


def solve_hdg(mesh: SimplexMesh, k: float, rule: PenaltyRule | np.ndarray, f: Callable | None,
              g: Callable, gh_degree: int = 1, keep_system: bool = False) -> HDGSolution:
    """Assemble, solve and recover; ``g(x, n)`` is the impedance datum."""
    if gh_degree not in (1, 2):
        raise ValueError("gh_degree must be 1 or 2")
    if mesh.dim == 1 and not keep_system and isinstance(mesh, Mesh1D):
        return _solve_hdg_1d(mesh, k, rule, f, g, gh_degree)
    ts = assemble_trace_system(mesh, k, rule, f, g)
    try:
        uhat = solve_trace_system(ts, mesh.dim)
    except ArithmeticError as exc:
        tag = rule.tag if isinstance(rule, PenaltyRule) else "explicit"
        raise HDGSolveError(f"trace solve failed (k={k:g}, h={mesh.h:g}, tau={tag}): {exc}") from exc
    from .linalg import residual
    res = residual(ts.matrix, uhat, ts.rhs)
    x = ts.elements.recover(uhat[ts.dof_map])
    d = mesh.dim
    u = x[:, :d + 1]
    q = np.stack([x[:, (d + 1) * (c + 1):(d + 1) * (c + 2)] for c in range(d)], axis=2)
    gh = boundary_projection(mesh, g, k, gh_degree)
    return HDGSolution(
        mesh, float(k), rule if isinstance(rule, PenaltyRule) else None, ts.tau, u, q, uhat,
        gh_degree, gh, res,
        outside_theory=bool(isinstance(rule, PenaltyRule) and rule.outside_theory),
        system=ts if keep_system else None)


def _solve_hdg_1d(mesh, k, rule, f, g, gh_degree) -> HDGSolution:
    """Fused 1D path through :mod:`hdg_helmholtz.kernels` (same arithmetic as the generic path)."""
    from . import kernels
    from .linalg import residual_tridiagonal
    tau = facet_tau(mesh, k, rule) if isinstance(rule, PenaltyRule) else np.asarray(rule, dtype=complex)
    F = element_load(mesh, f, k)
    gb = boundary_load(mesh, g, k)[:, 0]  # boundary facets are the end nodes, in order
    tag = rule.tag if isinstance(rule, PenaltyRule) else "explicit"
    try:
        status, uhat, u, q, system = kernels.solve_1d(mesh.nodes, k, tau, F[:, 0], F[:, 1], gb[0], gb[-1])
    except ArithmeticError as exc:
        raise HDGSolveError(f"trace solve failed (k={k:g}, h={mesh.h:g}, tau={tag}): {exc}") from exc
    if status >= 0:
        kh = float(k * mesh.cell_diameters[status])
        raise ElementSingularError(f"local HDG block singular on element {status} (k h_K = {kh:.6g})",
                                   int(status), kh)
    if not np.all(np.isfinite(uhat)):
        raise HDGSolveError(f"trace solve failed (k={k:g}, h={mesh.h:g}, tau={tag}): non-finite solution")
    res = residual_tridiagonal(*system, uhat)
    gh = boundary_projection(mesh, g, k, gh_degree)
    return HDGSolution(
        mesh, float(k), rule if isinstance(rule, PenaltyRule) else None, tau, u, q[:, :, None], uhat,
        gh_degree, gh, res, outside_theory=bool(isinstance(rule, PenaltyRule) and rule.outside_theory),
        system=None)


# ---------------------------------------------------------------------------
# numerical flux
# ---------------------------------------------------------------------------

def facet_cell_bary(mesh: SimplexMesh, sb: np.ndarray) -> np.ndarray:
    """Cell barycentric coordinates of facet points given in canonical facet coordinates.

    ``sb`` (nq, d) refers to the facet's vertices in sorted global order.
    Returns (nel, d+1, nq, d+1): for element e and its facet j.
    """
    d = mesh.dim
    nel = mesh.n_cells
    out = np.zeros((nel, d + 1, sb.shape[0], d + 1))
    fv = _facet_vertex_table(d)
    for j in range(d + 1):
        if d == 1:
            out[:, j, :, fv[j, 0]] = sb[None, :, 0]
            continue
        gv = mesh.cells[:, fv[j]]
        lo_first = gv[:, 0] < gv[:, 1]
        for a in range(d):
            canon = np.where(lo_first, a, 1 - a)  # canonical slot of local facet vertex a
            out[:, j, :, fv[j, a]] = sb[:, canon].T
    return out


def flux_values(sol: HDGSolution, sb: np.ndarray, boundary_formula: bool = True) -> np.ndarray:
    """q̂_h . n_K at facet points ``sb`` (canonical facet coordinates), shape (nel, d+1, nq).

    Interior facets use q.n + tau (u - û). On boundary facets the impedance
    relation is used: q̂.n = (ik (q.n + tau u) - tau g_h) / (tau + ik), with
    g_h of the degree chosen for the solve. For g_h of degree 1 this equals
    the interior formula since û then satisfies the boundary equation exactly.
    """
    mesh = sol.mesh
    d = mesh.dim
    lam = facet_cell_bary(mesh, sb)  # (nel, j, q, i)
    Nrm = mesh.normals  # (nel, j, c)
    qn = np.einsum("ejqi,eic,ejc->ejq", lam, sol.q, Nrm)
    uh = np.einsum("ejqi,ei->ejq", lam, sol.u)
    uhat_loc = sol.uhat[mesh.trace_dof_map].reshape(mesh.n_cells, d + 1, d)
    # trace slots follow local facet-vertex order; lam already maps canonical points to them
    fv = _facet_vertex_table(d)
    uhat_pts = np.zeros_like(uh)
    for j in range(d + 1):
        for a in range(d):
            uhat_pts[:, j] += lam[:, j, :, fv[j, a]] * uhat_loc[:, j, a][:, None]
    tau = sol.tau[mesh.cell_facets][:, :, None]
    flux = qn + tau * (uh - uhat_pts)
    if boundary_formula and sol.gh is not None:
        bf, cells, loc = boundary_facets(mesh)
        k = sol.k
        tb = sol.tau[bf][:, None]
        ghv = _eval_gh(sol.gh, sb, d)  # (nb, nq)
        flux[cells, loc] = (1j * k * (qn[cells, loc] + tb * uh[cells, loc]) - tb * ghv) / (tb + 1j * k)
    return flux


def _eval_gh(coef: np.ndarray, sb: np.ndarray, d: int) -> np.ndarray:
    if d == 1:
        return np.repeat(coef[:, :1], sb.shape[0], axis=1)
    vals = [sb[:, 0], sb[:, 1]]
    if coef.shape[1] == 3:
        vals.append(4 * sb[:, 0] * sb[:, 1])
    return coef @ np.array(vals)


def numerical_flux(sol: HDGSolution, facet: int) -> np.ndarray:
    """Vertex values of q̂_h . n on ``facet`` as seen from each adjacent element.

    Returns (n_sides, d): rows follow ``mesh.facet_cells[facet]``; columns the
    facet vertices in canonical order. The normal is each element's outward one,
    so a single-valued flux shows up as rows of opposite sign.
    """
    mesh = sol.mesh
    d = mesh.dim
    sb = np.eye(d)
    vals = flux_values(sol, sb)
    out = []
    for side in range(2):
        c = mesh.facet_cells[facet, side]
        if c < 0:
            continue
        out.append(vals[c, mesh.facet_local[facet, side]])
    return np.array(out)


def flux_jump(sol: HDGSolution) -> float:
    """max |q̂.n_+ + q̂.n_-| over interior facet vertices, relative to max |q̂.n|."""
    mesh = sol.mesh
    vals = flux_values(sol, np.eye(mesh.dim))
    inner = np.flatnonzero(~mesh.boundary)
    c0, c1 = mesh.facet_cells[inner, 0], mesh.facet_cells[inner, 1]
    l0, l1 = mesh.facet_local[inner, 0], mesh.facet_local[inner, 1]
    jump = np.abs(vals[c0, l0] + vals[c1, l1]).max() if len(inner) else 0.0
    scale = np.abs(vals).max()
    return float(jump / scale) if scale > 0 else float(jump)
