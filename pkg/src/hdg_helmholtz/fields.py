"""Broken (elementwise) fields evaluated at per-element barycentric points.

Every field answers ``values(cells, bary)`` with ``cells`` (M,) element ids and
``bary`` (M, nq, d+1) barycentric points; scalar fields return (M, nq) and
vector fields (M, nq, d). ``grad`` (scalars) and ``div`` (vectors) follow
the same convention.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from . import basis
from .mesh import SimplexMesh


class BrokenField:
    mesh: SimplexMesh
    vector: bool

    def values(self, cells, bary):
        raise NotImplementedError

    def grad(self, cells, bary):
        raise NotImplementedError(f"{type(self).__name__} has no gradient")

    def div(self, cells, bary):
        raise NotImplementedError(f"{type(self).__name__} has no divergence")

    def __add__(self, other):
        return Combination(self, other, 1.0, 1.0)

    def __sub__(self, other):
        return Combination(self, other, 1.0, -1.0)

    def __rmul__(self, c):
        return Combination(self, ZeroField(self.mesh, self.vector), complex(c), 0.0)


class ZeroField(BrokenField):
    def __init__(self, mesh: SimplexMesh, vector: bool = False):
        self.mesh = mesh
        self.vector = vector

    def _z(self, cells, bary, extra=()):
        return np.zeros(bary.shape[:-1] + extra, dtype=complex)

    def values(self, cells, bary):
        return self._z(cells, bary, (self.mesh.dim,) if self.vector else ())

    def grad(self, cells, bary):
        return self._z(cells, bary, (self.mesh.dim,))

    def div(self, cells, bary):
        return self._z(cells, bary)


class Combination(BrokenField):
    def __init__(self, a: BrokenField, b: BrokenField, ca: complex, cb: complex):
        if a.vector != b.vector:
            raise ValueError("cannot combine scalar and vector fields")
        self.mesh, self.vector = a.mesh, a.vector
        self.a, self.b, self.ca, self.cb = a, b, ca, cb

    def values(self, cells, bary):
        return self.ca * self.a.values(cells, bary) + self.cb * self.b.values(cells, bary)

    def grad(self, cells, bary):
        return self.ca * self.a.grad(cells, bary) + self.cb * self.b.grad(cells, bary)

    def div(self, cells, bary):
        return self.ca * self.a.div(cells, bary) + self.cb * self.b.div(cells, bary)


class PolyField(BrokenField):
    """Elementwise P1 (nodal) or P2 (hierarchical) field.

    ``coef`` is (nel, nb) for scalars or (nel, nb, d) for vectors.
    """

    def __init__(self, mesh: SimplexMesh, coef: np.ndarray, degree: int = 1):
        coef = np.asarray(coef)
        d = mesh.dim
        nb = d + 1 if degree == 1 else basis.p2_size(d)
        if degree not in (1, 2) or coef.shape[:2] != (mesh.n_cells, nb):
            raise ValueError(f"coefficient shape {coef.shape} does not fit degree {degree}")
        self.mesh, self.coef, self.degree = mesh, coef, degree
        self.vector = coef.ndim == 3

    def _phi(self, bary):
        return bary if self.degree == 1 else basis.p2_values(bary)

    def _dphi(self, cells, bary):
        G = self.mesh.bary_grads[cells]
        if self.degree == 1:
            return np.broadcast_to(G[:, None], bary.shape[:2] + G.shape[1:])
        return basis.p2_gradients(bary, G)

    def values(self, cells, bary):
        c = self.coef[cells]
        phi = self._phi(bary)
        if self.vector:
            return np.einsum("mqb,mbc->mqc", phi, c)
        return np.einsum("mqb,mb->mq", phi, c)

    def grad(self, cells, bary):
        if self.vector:
            raise ValueError("gradient of a vector field is not provided")
        return np.einsum("mqbc,mb->mqc", self._dphi(cells, bary), self.coef[cells])

    def div(self, cells, bary):
        if not self.vector:
            raise ValueError("divergence of a scalar field")
        return np.einsum("mqbc,mbc->mq", self._dphi(cells, bary), self.coef[cells])


class FunctionField(BrokenField):
    """A field given by callables of physical points (..., d)."""

    def __init__(self, mesh: SimplexMesh, fn: Callable, grad: Callable | None = None,
                 div: Callable | None = None, vector: bool = False):
        self.mesh, self.fn, self._grad, self._div, self.vector = mesh, fn, grad, div, vector

    def _x(self, cells, bary):
        return np.einsum("mqi,mid->mqd", bary, self.mesh.cell_coords[cells])

    def values(self, cells, bary):
        return np.asarray(self.fn(self._x(cells, bary)), dtype=complex)

    def grad(self, cells, bary):
        if self._grad is None:
            return super().grad(cells, bary)
        return np.asarray(self._grad(self._x(cells, bary)), dtype=complex)

    def div(self, cells, bary):
        if self._div is None:
            return super().div(cells, bary)
        return np.asarray(self._div(self._x(cells, bary)), dtype=complex)


def exact_fields(mesh: SimplexMesh, exact) -> tuple[FunctionField, FunctionField]:
    """(u, q = -grad u) of an :class:`~hdg_helmholtz.exact.ExactSolution` as fields."""
    u = FunctionField(mesh, exact.u, grad=exact.grad_u)
    q = FunctionField(mesh, exact.q, div=exact.div_q, vector=True)
    return u, q


def solution_fields(sol) -> tuple[PolyField, PolyField]:
    """(u_h, q_h) of an HDG solution as P1 fields."""
    return PolyField(sol.mesh, sol.u), PolyField(sol.mesh, sol.q)
