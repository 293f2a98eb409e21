"""Shared helpers for the weak-form tests."""
import numpy as np

from hdg_helmholtz import basis
from hdg_helmholtz.fields import PolyField, exact_fields, solution_fields
from hdg_helmholtz.forms import Integrator, _ip, evaluate_A, evaluate_F
from hdg_helmholtz.hdg import solve_hdg


def random_pair(mesh, rng, degree):
    d = mesh.dim
    nb = basis.p2_size(d) if degree == 2 else d + 1
    c = lambda *s: rng.normal(size=s) + 1j * rng.normal(size=s)
    return PolyField(mesh, c(mesh.n_cells, nb), degree), PolyField(mesh, c(mesh.n_cells, nb, d), degree)


def field_norm(integ, field):
    v = integ.cell(field)
    return np.sqrt(_ip(v, v, integ.cell_w).real)


def _test_pairs(mesh, cells):
    d = mesh.dim
    for e in cells:
        for b in range((d + 1) * (d + 1)):
            cv = np.zeros((mesh.n_cells, d + 1))
            cr = np.zeros((mesh.n_cells, d + 1, d))
            if b < d + 1:
                cv[e, b] = 1
            else:
                cr[e, (b - d - 1) % (d + 1), (b - d - 1) // (d + 1)] = 1
            yield PolyField(mesh, cv), PolyField(mesh, cr)


class _Cached:
    """Memoise a field's evaluations on the integrator's (fixed) point arrays."""

    def __init__(self, field):
        self.field, self.mesh, self.vector, self.memo = field, field.mesh, field.vector, {}

    def __getattr__(self, name):
        fn = getattr(self.field, name)
        if name not in ("values", "grad", "div"):
            return fn

        def call(cells, bary):
            key = (name, id(cells), id(bary))
            if key not in self.memo:
                self.memo[key] = (cells, bary, fn(cells, bary))  # keep arrays alive so ids stay unique
            return self.memo[key][2]
        return call

    def __sub__(self, other):
        from hdg_helmholtz.fields import Combination
        return Combination(self, other, 1.0, -1.0)


def weak_form_residuals(mesh, ex, k, rule, cells, degree=12, subdivisions=4):
    tau = np.full(mesh.n_facets, complex(rule(k, mesh.h)))
    sol = solve_hdg(mesh, k, rule, ex.f, ex.g)
    U, Q = (_Cached(f) for f in exact_fields(mesh, ex))
    uh, qh = solution_fields(sol)
    integ = Integrator(mesh, degree, subdivisions)
    scale_uq = field_norm(integ, U) + field_norm(integ, Q)
    cons, orth, disc = 0.0, 0.0, 0.0
    for v, r in _test_pairs(mesh, cells):
        scale = scale_uq * (field_norm(integ, v) + field_norm(integ, r))
        F = evaluate_F((v, r), mesh, k, tau, ex.f, ex.g, integrator=integ)
        cons = max(cons, abs(evaluate_A("A", (U, Q), (v, r), mesh, k, tau, integrator=integ) - F) / scale)
        orth = max(orth, abs(evaluate_A("A", (U - uh, Q - qh), (v, r), mesh, k, tau, integrator=integ)) / scale)
        disc = max(disc, abs(evaluate_A("A", (uh, qh), (v, r), mesh, k, tau, integrator=integ) - F) / scale)
    return cons, orth, disc


