"""Sesquilinear forms of the HDG method written in (u, q) only.

Notation on a facet e: for e interior with sides K0, K1, jumps are
[v] = v0 n0 + v1 n1 (a vector) and [r] = r0.n0 + r1.n1 (a scalar); the
average is {v} = (v0 + v1)/2. On a boundary facet [v] = v n, [r] = r.n and
{v} = v. Brackets <a, b> integrate a * conj(b).

Three algebraically equivalent forms of A are available:

``A``   (q,r) - k^2(u,v) - (u, div r) - (q, grad v)
        + <[q]/(2 tau) + {u}, [r]>_I + <{q} + tau/2 [u], [v]>_I
        + <(q.n + tau u)/(tau + ik), r.n - ik v>_N
``A2``  (q,r) - k^2(u,v) + (grad u, r) - (q, grad v)
        + <{q}, [v]>_I - <[u], {r}>_I + <[q]/(2 tau), [r]>_I + <tau/2 [u], [v]>_I
        + ik <u, v>_N + <(q.n - ik u)/(tau + ik), r.n - ik v>_N
``A3``  (q,r) - k^2(u,v) + (grad u, r) + (div q, v)
        + <[q], [r]/(2 conj tau) - {v}>_I + <[u], conj(tau)/2 [v] - {r}>_I
        + <q.n - ik u, (r.n - conj(tau) v)/(conj(tau) - ik)>_N

and the right-hand side F(v, r) = (f, v) - <g/(tau + ik), r.n - conj(tau) v>_N.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import basis
from .fields import BrokenField
from .hdg import facet_cell_bary
from .mesh import SimplexMesh


@dataclass
class _FacetSide:
    cells: np.ndarray
    bary: np.ndarray  # (M, nq, d+1)


class Integrator:
    """Cell and facet quadrature on a mesh (facet points shared by both sides)."""

    def __init__(self, mesh: SimplexMesh, degree: int = 8, subdivisions: int = 1):
        self.mesh = mesh
        d = mesh.dim
        rule = basis.cell_rule(d, degree, subdivisions)
        nel = mesh.n_cells
        self.cells = np.arange(nel)
        self.cell_bary = np.broadcast_to(rule.bary, (nel,) + rule.bary.shape)
        self.cell_w = mesh.volumes[:, None] * rule.weights[None]
        if d == 1:
            sb, sw = np.ones((1, 1)), np.ones(1)
        else:
            er = basis.quadrature("edge", degree, subdivisions)
            sb, sw = er.bary, er.weights
        fcb = facet_cell_bary(mesh, sb)  # (nel, d+1, nq, d+1)
        inner = np.flatnonzero(~mesh.boundary)
        bnd = np.flatnonzero(mesh.boundary)
        fc, fl = mesh.facet_cells, mesh.facet_local
        self.inner = inner
        self.side0 = _FacetSide(fc[inner, 0], fcb[fc[inner, 0], fl[inner, 0]])
        self.side1 = _FacetSide(fc[inner, 1], fcb[fc[inner, 1], fl[inner, 1]])
        self.n_inner = mesh.normals[fc[inner, 0], fl[inner, 0]]  # (ni, d), outward from side 0
        self.w_inner = mesh.facet_measures[inner][:, None] * sw[None]
        self.bnd = bnd
        self.bside = _FacetSide(fc[bnd, 0], fcb[fc[bnd, 0], fl[bnd, 0]])
        self.n_bnd = mesh.normals[fc[bnd, 0], fl[bnd, 0]]
        self.w_bnd = mesh.facet_measures[bnd][:, None] * sw[None]

    # evaluation helpers -----------------------------------------------------
    def cell(self, field: BrokenField, what: str = "values"):
        return getattr(field, what)(self.cells, self.cell_bary)

    def trace(self, field: BrokenField, side: _FacetSide):
        return field.values(side.cells, side.bary)


def _ip(a, b, w):
    """Sum of w * a * conj(b) with vector dot over a trailing axis."""
    prod = a * np.conj(b)
    if prod.ndim == w.ndim + 1:
        prod = prod.sum(axis=-1)
    return complex(np.sum(w * prod))


def _tau_arrays(mesh: SimplexMesh, tau, integ: Integrator):
    tau = np.broadcast_to(np.asarray(tau, dtype=complex), (mesh.n_facets,))
    return tau[integ.inner][:, None], tau[integ.bnd][:, None]


class _Traces:
    """Jumps and averages of a (scalar, vector) pair on interior and boundary facets."""

    def __init__(self, integ: Integrator, s: BrokenField, v: BrokenField):
        n0 = integ.n_inner[:, None, :]
        s0, s1 = integ.trace(s, integ.side0), integ.trace(s, integ.side1)
        v0, v1 = integ.trace(v, integ.side0), integ.trace(v, integ.side1)
        self.js = (s0 - s1)[..., None] * n0          # [s], vector
        self.avs = (s0 + s1) / 2                     # {s}
        self.jv = np.sum((v0 - v1) * n0, axis=-1)    # [v], scalar
        self.avv = (v0 + v1) / 2                     # {v}
        nb = integ.n_bnd[:, None, :]
        self.sb = integ.trace(s, integ.bside)
        self.vnb = np.sum(integ.trace(v, integ.bside) * nb, axis=-1)


def evaluate_A(variant: str, trial: tuple[BrokenField, BrokenField], test: tuple[BrokenField, BrokenField],
               mesh: SimplexMesh, k: float, tau, degree: int = 8, subdivisions: int = 1,
               integrator: Integrator | None = None) -> complex:
    """A(u, q; v, r) in the requested variant (``A``, ``A2`` or ``A3``)."""
    integ = integrator or Integrator(mesh, degree, subdivisions)
    u, q = trial
    v, r = test
    ti, tb = _tau_arrays(mesh, tau, integ)
    T = _Traces(integ, u, q)
    S = _Traces(integ, v, r)
    w, wi, wb = integ.cell_w, integ.w_inner, integ.w_bnd
    ik = 1j * k
    uc, qc = integ.cell(u), integ.cell(q)
    vc, rc = integ.cell(v), integ.cell(r)
    val = _ip(qc, rc, w) - k * k * _ip(uc, vc, w)
    if variant == "A":
        val -= _ip(uc, integ.cell(r, "div"), w)
        val -= _ip(qc, integ.cell(v, "grad"), w)
        val += _ip(T.jv / (2 * ti) + T.avs, S.jv, wi)
        val += _ip(T.avv + (ti / 2)[..., None] * T.js, S.js, wi)
        val += _ip((T.vnb + tb * T.sb) / (tb + ik), S.vnb - ik * S.sb, wb)
    elif variant == "A2":
        val += _ip(integ.cell(u, "grad"), rc, w)
        val -= _ip(qc, integ.cell(v, "grad"), w)
        val += _ip(T.avv, S.js, wi) - _ip(T.js, S.avv, wi)
        val += _ip(T.jv / (2 * ti), S.jv, wi) + _ip((ti / 2)[..., None] * T.js, S.js, wi)
        val += ik * _ip(T.sb, S.sb, wb)
        val += _ip((T.vnb - ik * T.sb) / (tb + ik), S.vnb - ik * S.sb, wb)
    elif variant == "A3":
        tic, tbc = np.conj(ti), np.conj(tb)
        val += _ip(integ.cell(u, "grad"), rc, w)
        val += _ip(integ.cell(q, "div"), vc, w)
        val += _ip(T.jv, S.jv / (2 * tic), wi) - _ip(T.jv, S.avs, wi)
        val += _ip(T.js, (tic / 2)[..., None] * S.js - S.avv, wi)
        val += _ip(T.vnb - ik * T.sb, (S.vnb - tbc * S.sb) / (tbc - ik), wb)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return val


def evaluate_F(test: tuple[BrokenField, BrokenField], mesh: SimplexMesh, k: float, tau,
               f: Callable | None, g: Callable, degree: int = 8, subdivisions: int = 1,
               integrator: Integrator | None = None) -> complex:
    """F(v, r) = (f, v) - <g/(tau + ik), r.n - conj(tau) v>_N."""
    integ = integrator or Integrator(mesh, degree, subdivisions)
    v, r = test
    _, tb = _tau_arrays(mesh, tau, integ)
    val = 0j
    if f is not None:
        x = np.einsum("mqi,mid->mqd", integ.cell_bary, mesh.cell_coords)
        val += _ip(np.asarray(f(x), dtype=complex), integ.cell(v), integ.cell_w)
    xb = np.einsum("mqi,mid->mqd", integ.bside.bary, mesh.cell_coords[integ.bside.cells])
    gb = np.asarray(g(xb, integ.n_bnd[:, None, :]), dtype=complex)
    vb = integ.trace(v, integ.bside)
    rnb = np.sum(integ.trace(r, integ.bside) * integ.n_bnd[:, None, :], axis=-1)
    val -= _ip(gb / (tb + 1j * k), rnb - np.conj(tb) * vb, integ.w_bnd)
    return val


def energy_norm_sq(v: BrokenField, r: BrokenField, mesh: SimplexMesh, k: float, tau,
                   degree: int = 8, integrator: Integrator | None = None) -> float:
    """||r||^2 + ||[r]||^2/(2 tau) + tau/2 ||[v]||^2 + tau/(tau^2 + k^2) ||r.n - ik v||_N^2 (real tau)."""
    integ = integrator or Integrator(mesh, degree)
    ti, tb = _tau_arrays(mesh, tau, integ)
    if np.any(ti.imag != 0) or np.any(tb.imag != 0):
        raise ValueError("the energy norm identity needs real tau")
    ti, tb = ti.real, tb.real
    S = _Traces(integ, v, r)
    rc = integ.cell(r)
    val = _ip(rc, rc, integ.cell_w)
    val += _ip(S.jv / np.sqrt(2 * ti), S.jv / np.sqrt(2 * ti), integ.w_inner)
    js = np.sqrt(ti / 2)[..., None] * S.js
    val += _ip(js, js, integ.w_inner)
    bt = S.vnb - 1j * k * S.sb
    val += _ip(np.sqrt(tb / (tb ** 2 + k * k)) * bt, np.sqrt(tb / (tb ** 2 + k * k)) * bt, integ.w_bnd)
    return float(val.real)


def magic_formula(v: BrokenField, r: BrokenField, mesh: SimplexMesh, degree: int = 8,
                  integrator: Integrator | None = None) -> tuple[complex, complex]:
    """Both sides of  sum_K <v, r.n_K>_dK = <[v], {r}>_I + <{v}, [r]>_all."""
    integ = integrator or Integrator(mesh, degree)
    lhs = 0j
    for side, sign in ((integ.side0, 1.0), (integ.side1, -1.0)):
        rn = np.sum(integ.trace(r, side) * (sign * integ.n_inner[:, None, :]), axis=-1)
        lhs += _ip(integ.trace(v, side), rn, integ.w_inner)
    S = _Traces(integ, v, r)
    lhs += _ip(S.sb, S.vnb, integ.w_bnd)
    rhs = _ip(S.js, S.avv, integ.w_inner) + _ip(S.avs, S.jv, integ.w_inner) + _ip(S.sb, S.vnb, integ.w_bnd)
    return lhs, rhs
