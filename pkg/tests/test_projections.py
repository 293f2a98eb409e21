from types import SimpleNamespace

import numpy as np
import pytest

from hdg_helmholtz.exact import ExactSolution, bessel_solution_2d, plane_wave_1d
from hdg_helmholtz.fields import PolyField, exact_fields
from hdg_helmholtz.forms import Integrator, _ip
from hdg_helmholtz.hdg import solve_hdg
from hdg_helmholtz.mesh import TriMesh, build_hexagon_equilateral, build_uniform_1d
from hdg_helmholtz.penalty import CORRECTED_1D, IMAG_K, IMAG_OVER_H, REAL_K
from hdg_helmholtz.projections import (
    ProjectionError, edge_l2_projection, elementwise_mean, hdg_projection, projection_residual,
    relative_errors,
)


def _l2(integ, a, b):
    d = integ.cell(a) - integ.cell(b)
    return np.sqrt(_ip(d, d, integ.cell_w).real)


@pytest.mark.parametrize("mesh", [build_uniform_1d(0, 1, 6), build_hexagon_equilateral(2)], ids=["1d", "2d"])
@pytest.mark.parametrize("beta", [1.0, 3.0 + 2j])
def test_reproduces_p1_pairs(mesh, beta, rng):
    d = mesh.dim
    u = PolyField(mesh, rng.normal(size=(mesh.n_cells, d + 1)) + 1j * rng.normal(size=(mesh.n_cells, d + 1)))
    q = PolyField(mesh, rng.normal(size=(mesh.n_cells, d + 1, d)) + 0j)
    P = hdg_projection(beta, u, q, mesh)
    np.testing.assert_allclose(P.u, u.coef, atol=1e-13)
    np.testing.assert_allclose(P.q, q.coef, atol=1e-13)


@pytest.mark.parametrize("beta", [1.0, 5j, 100.0])
def test_defining_equations(beta):
    m = build_hexagon_equilateral(3)
    U, Q = exact_fields(m, bessel_solution_2d(6.0))
    P = hdg_projection(beta, U, Q, m)
    assert projection_residual(P, U, Q, m) <= 1e-11


def test_beta_zero_rejected():
    m = build_uniform_1d(0, 1, 4)
    U, Q = exact_fields(m, plane_wave_1d(1.0))
    with pytest.raises(ValueError):
        hdg_projection(0, U, Q, m)


def test_projection_rate():
    k = 5.0
    ex = plane_wave_1d(k)
    ns = [8, 16, 32, 64, 128]
    errs = []
    for n in ns:
        m = build_uniform_1d(0, 1, n)
        U, Q = exact_fields(m, ex)
        P = hdg_projection(k, U, Q, m)
        errs.append(_l2(Integrator(m, 10), U, P.fields(m)[0]))
    slope = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.1)


def test_beta_scaling():
    m = build_uniform_1d(0, 1, 8)
    U, Q = exact_fields(m, plane_wave_1d(20.0))
    integ = Integrator(m, 12, 4)
    e1 = _l2(integ, U, hdg_projection(1.0, U, Q, m).fields(m)[0])
    e100 = _l2(integ, U, hdg_projection(100.0, U, Q, m).fields(m)[0])
    assert e100 < e1


def test_1d_projection_determinant_vanishes_only_at_zero():
    from hdg_helmholtz.projections import projection_matrix
    m = build_uniform_1d(0, 1, 2)
    betas = np.array([1e-6, 0.3, -7.0, 2j, 100.0 - 3j])
    dets = np.array([np.linalg.det(projection_matrix(m, b)[0]) for b in betas])
    np.testing.assert_allclose(dets / betas, dets[0] / betas[0], rtol=1e-8)


def test_edge_projection_constant_and_linear():
    P = np.array([[[0.0, 0.0], [0.3, 0.4]]])
    c = edge_l2_projection(lambda x: np.full(x.shape[:-1], 2.5 + 1j), P, 1)
    np.testing.assert_allclose(c, [[2.5 + 1j, 2.5 + 1j]], atol=1e-13)
    c = edge_l2_projection(lambda x: x[..., 0] + 0j, P, 1)
    np.testing.assert_allclose(c, [[0.0, 0.3]], atol=1e-13)
    c2 = edge_l2_projection(lambda x: (x[..., 0] ** 2) + 0j, P, 2)
    # x^2 on the edge: x = 0.3 s1, so x^2 = 0.09 s1^2 = 0.09 (s1 - s0 s1) -> {0, 0.09, -0.09/4}
    np.testing.assert_allclose(c2, [[0.0, 0.09, -0.0225]], atol=1e-13)


def test_edge_projection_degree2_beats_degree1():
    k = 50.0
    P = np.array([[[0.0, 0.0], [0.01, 0.0]]])
    g = lambda x: np.exp(1j * k * x[..., 0])
    from hdg_helmholtz import basis
    r = basis.quadrature("edge", 12)
    x = np.einsum("qa,ead->eqd", r.bary, P)
    res = []
    for deg in (1, 2):
        c = edge_l2_projection(g, P, deg)
        vals = c[0, 0] * r.bary[:, 0] + c[0, 1] * r.bary[:, 1]
        if deg == 2:
            vals = vals + c[0, 2] * 4 * r.bary[:, 0] * r.bary[:, 1]
        res.append(np.sqrt(r.weights @ np.abs(g(x)[0] - vals) ** 2))
    assert res[1] < res[0]


def test_edge_projection_bad_degree():
    with pytest.raises(ValueError):
        edge_l2_projection(lambda x: x[..., 0], np.zeros((1, 2, 2)), 3)


def test_zero_error_for_exact_representation():
    m = build_hexagon_equilateral(2)
    a = np.array([0.3, -1.2])
    ex = ExactSolution(1.0, 2, lambda x: 1.0 + x @ a + 0j,
                       lambda x: np.broadcast_to(a + 0j, x.shape), lambda x: np.zeros(x.shape[:-1]))
    sol = SimpleNamespace(mesh=m, k=1.0, rule=None,
                          u=ex.u(m.cell_coords), q=ex.q(m.cell_coords))
    rep = relative_errors(sol, ex)
    assert rep.e_u <= 1e-12 and rep.e_q <= 1e-12


def test_pre_pollution_plateau():
    ex = plane_wave_1d(100.0)
    rep = relative_errors(solve_hdg(build_uniform_1d(0, 1, 100), 100.0, IMAG_K, ex.f, ex.g), ex)
    assert 0.2 <= rep.e_u <= 2.0
    assert rep.e_u > 3 * rep.e_uI


def test_interpolation_error_independent_of_rule():
    ex = plane_wave_1d(30.0)
    m = build_uniform_1d(0, 1, 40)
    reps = [relative_errors(solve_hdg(m, 30.0, r, ex.f, ex.g), ex) for r in (IMAG_OVER_H, REAL_K, CORRECTED_1D)]
    assert len({r.e_uI for r in reps}) == 1 and len({r.e_qI for r in reps}) == 1


def test_errors_invariant_under_reordering(rng):
    m = build_hexagon_equilateral(3)
    perm = rng.permutation(m.n_cells)
    m2 = TriMesh(m.vertices, m.cells[perm])
    ex = bessel_solution_2d(4.0)
    r1 = relative_errors(solve_hdg(m, 4.0, REAL_K, ex.f, ex.g), ex)
    r2 = relative_errors(solve_hdg(m2, 4.0, REAL_K, ex.f, ex.g), ex)
    for name in ("e_u", "e_q", "e_uI", "e_qI"):
        assert getattr(r2, name) == pytest.approx(getattr(r1, name), rel=1e-10)


def test_quadrature_refinement_for_large_kh():
    ex = plane_wave_1d(40.0)
    rep = relative_errors(solve_hdg(build_uniform_1d(0, 1, 10), 40.0, IMAG_K, ex.f, ex.g), ex)
    assert rep.subdivisions >= 4


def test_elementwise_mean_of_p1():
    m = build_hexagon_equilateral(2)
    coef = np.arange(m.n_cells * 3, dtype=float).reshape(-1, 3) + 0j
    np.testing.assert_allclose(elementwise_mean(m, PolyField(m, coef)), coef.mean(axis=1), atol=1e-12)
