"""Local P2 postprocessing of u_h.

On each element K find u* in P2(K) with

    (grad u*, grad v)_K - k^2 (u*, v)_K = (f, v)_K - <q̂.n, v>_dK   for v in P2 with zero mean,
    m_K u* = m_K u_h.

The zero-mean test space is spanned by the non-constant hierarchical modes
minus their means (d + d(d+1)/2 functions); the mean condition closes the
square system.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import basis
from .fields import PolyField
from .hdg import HDGSolution, facet_cell_bary, flux_values
from .linalg import SingularMatrixError, batched_solve
from .mesh import SimplexMesh

PIVOT_RTOL = 1e-10


class PostprocessSingularError(ArithmeticError):
    """Local postprocessing operator singular (k^2 near an element eigenvalue)."""

    def __init__(self, message: str, element: int, kh: float):
        super().__init__(message)
        self.element = element
        self.kh = kh


@dataclass
class PostprocessedField:
    """Hierarchical P2 coefficients of u*_h, (nel, nb)."""

    mesh: SimplexMesh
    coef: np.ndarray

    @property
    def field(self) -> PolyField:
        return PolyField(self.mesh, self.coef, 2)

    def means(self) -> np.ndarray:
        rule = basis.cell_rule(self.mesh.dim, 4)
        return self.coef @ (rule.weights @ basis.p2_values(rule.bary))


def _facet_rule(mesh: SimplexMesh, degree: int):
    if mesh.dim == 1:
        return np.ones((1, 1)), np.ones(1)
    r = basis.quadrature("edge", degree)
    return r.bary, r.weights


def local_system(mesh: SimplexMesh, k: float, u_means: np.ndarray, flux: np.ndarray,
                 f: Callable | None, degree: int = 6):
    """Matrices and loads of the local problems; ``flux`` is q̂.n at facet points (nel, d+1, nq)."""
    d = mesh.dim
    geom = mesh.geometry
    mats = basis.p2_local_matrices(geom, degree=4)
    mass, stiff, means = mats["mass"], mats["stiffness"], mats["means"]
    vol = mesh.volumes
    nel = mesh.n_cells
    nb = basis.p2_size(d)
    # (phi_a, psi_b) with psi_b = phi_b - m_b
    mass0 = mass - vol[:, None, None] * means[:, :, None] * means[:, None, :]
    op = stiff - k * k * mass0  # op[b, a]: test b, trial a (both real symmetric)
    Amat = np.zeros((nel, nb, nb), dtype=complex)
    Amat[:, :nb - 1] = op[:, 1:]
    Amat[:, nb - 1] = means
    # row scales from the uncancelled magnitudes, so a resonant row stays small
    scale = np.ones((nel, nb))
    scale[:, :nb - 1] = (np.abs(stiff) + k * k * np.abs(mass0))[:, 1:].max(axis=2)
    scale[:, nb - 1] = np.abs(means).max(axis=1)
    load = np.zeros((nel, nb), dtype=complex)
    if f is not None:
        rule = basis.cell_rule(d, degree, max(1, int(np.ceil(k * mesh.h))))
        x = rule.points(mesh.cell_coords)
        phi = basis.p2_values(rule.bary)
        psi = phi[None] - means[:, None, :]
        fx = np.asarray(f(x), dtype=complex)
        load[:, :nb - 1] = vol[:, None] * np.einsum("q,eq,eqb->eb", rule.weights, fx, psi)[:, 1:]
    sb, sw = _facet_rule(mesh, degree)
    lam = facet_cell_bary(mesh, sb)  # (nel, j, nq, d+1)
    psi_f = basis.p2_values(lam) - means[:, None, None, :]
    wf = mesh.cell_facet_measures[:, :, None] * sw[None, None]
    bnd = np.einsum("ejq,ejq,ejqb->eb", wf, flux, psi_f)
    load[:, :nb - 1] -= bnd[:, 1:]
    load[:, nb - 1] = u_means
    return Amat, load, scale


def _solve(mesh, k, Amat, load, scale):
    s = 1.0 / scale
    try:
        X, _ = batched_solve(Amat * s[:, :, None], load * s, rtol=PIVOT_RTOL)
    except SingularMatrixError as exc:
        e = exc.index
        kh = float(k * mesh.cell_diameters[e])
        raise PostprocessSingularError(
            f"postprocessing singular on element {e} (k h_K = {kh:.6g})", e, kh) from exc
    return X


def postprocess_element(coords: np.ndarray, u_mean: complex, flux: Callable, f: Callable | None,
                        k: float, degree: int = 6) -> np.ndarray:
    """Postprocess a single element with vertices ``coords`` (d+1, d).

    ``flux(x, n)`` gives q̂.n on the element boundary for the outward normal n.
    Returns the hierarchical P2 coefficients.
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    mesh = SimplexMesh(coords, np.arange(coords.shape[0])[None])
    sb, _ = _facet_rule(mesh, degree)
    lam = facet_cell_bary(mesh, sb)[0]  # (j, nq, d+1)
    x = np.einsum("jqi,id->jqd", lam, coords)
    n = mesh.normals[0][:, None, :]
    fl = np.asarray(flux(x, np.broadcast_to(n, x.shape)), dtype=complex)[None]
    return _solve(mesh, k, *local_system(mesh, k, np.array([u_mean]), fl, f, degree))[0]


def postprocess_all(sol: HDGSolution, f: Callable | None, degree: int = 6) -> PostprocessedField:
    """u*_h on every element, using q̂_h with the g_h degree chosen for the solve."""
    mesh = sol.mesh
    sb, _ = _facet_rule(mesh, degree)
    flux = flux_values(sol, sb)
    u_means = sol.u.mean(axis=1)  # P1 mean = average of vertex values
    return PostprocessedField(mesh, _solve(mesh, sol.k, *local_system(mesh, sol.k, u_means, flux, f, degree)))


def postprocess_residual(sol: HDGSolution, pp: PostprocessedField, f: Callable | None,
                         degree: int = 6) -> float:
    """max over elements of the local residual relative to the load norm."""
    mesh = sol.mesh
    sb, _ = _facet_rule(mesh, degree)
    Amat, load, _ = local_system(mesh, sol.k, sol.u.mean(axis=1), flux_values(sol, sb), f, degree)
    r = np.einsum("eab,eb->ea", Amat, pp.coef) - load
    scale = np.maximum(np.linalg.norm(load, axis=1), 1e-300)
    return float((np.linalg.norm(r, axis=1) / scale).max())
