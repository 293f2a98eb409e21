import numpy as np
import pytest

from hdg_helmholtz import basis
from hdg_helmholtz.exact import bessel_solution_2d, plane_wave_1d
from hdg_helmholtz.hdg import solve_hdg
from hdg_helmholtz.mesh import build_hexagon_equilateral, build_uniform_1d
from hdg_helmholtz.penalty import REAL_K
from hdg_helmholtz.postprocess import (
    PostprocessSingularError, postprocess_all, postprocess_element, postprocess_residual,
)
from hdg_helmholtz.projections import relative_errors


def _values(coef, bary):
    return basis.p2_values(bary) @ coef


def test_constant_data_gives_constant():
    h = 0.01
    X = np.array([[0.0, 0.0], [h, 0.0], [0.5 * h, 0.5 * np.sqrt(3) * h]])
    c = postprocess_element(X, 2.0 + 1j, lambda x, n: np.zeros(x.shape[:-1]), None, k=1.0)
    assert c[0] == pytest.approx(2.0 + 1j, abs=1e-8)
    assert np.abs(c[1:]).max() <= 1e-8


def test_quadratic_reproduced_1d():
    k = 3.0
    a, b = 0.2, 0.5
    u = lambda x: 1.0 + x[..., 0] - 3.0 * x[..., 0] ** 2
    du = lambda x: 1.0 - 6.0 * x[..., 0]
    f = lambda x: 6.0 - k * k * u(x)
    mean = (b - a) + (b * b - a * a) / 2 - (b ** 3 - a ** 3)
    mean /= (b - a)
    mean += 0  # mean of 1 + x - 3 x^2 over [a, b]
    c = postprocess_element(np.array([[a], [b]]), mean, lambda x, n: -du(x) * n[..., 0], f, k)
    lam = np.linspace(0, 1, 7)
    bary = np.stack([1 - lam, lam], axis=1)
    x = (a + (b - a) * lam)[:, None]
    np.testing.assert_allclose(_values(c, bary), u(x), atol=1e-12)


def test_quadratic_reproduced_2d():
    k = 2.0
    X = np.array([[0.1, 0.0], [0.4, 0.1], [0.2, 0.35]])
    A = np.array([[1.0, 0.3], [0.3, -2.0]])
    bvec = np.array([0.5, -1.0])
    u = lambda x: 0.7 + x @ bvec + np.einsum("...i,ij,...j->...", x, A, x)
    grad = lambda x: bvec + 2 * x @ A
    f = lambda x: -2 * np.trace(A) - k * k * u(x)
    r = basis.cell_rule(2, 6)
    mean = r.weights @ u(r.points(X))
    c = postprocess_element(X, mean, lambda x, n: -np.sum(grad(x) * n, axis=-1), f, k)
    bary = basis.cell_rule(2, 4).bary
    np.testing.assert_allclose(_values(c, bary), u(bary @ X), atol=1e-12)


@pytest.mark.parametrize("dim", [1, 2])
def test_means_and_residuals(dim):
    if dim == 1:
        m, ex, k = build_uniform_1d(0, 1, 32), plane_wave_1d(5.0), 5.0
    else:
        m, ex, k = build_hexagon_equilateral(4), bessel_solution_2d(3.0), 3.0
    sol = solve_hdg(m, k, REAL_K, ex.f, ex.g, gh_degree=2)
    pp = postprocess_all(sol, ex.f)
    means = sol.u.mean(axis=1)
    assert np.abs(pp.means() - means).max() <= 1e-12 * np.abs(means).max()
    assert postprocess_residual(sol, pp, ex.f) <= 1e-10


def test_postprocessing_rate_and_gain():
    k = 5.0
    ex = plane_wave_1d(k)
    ns = [16, 32, 64, 128, 256]
    eu, es = [], []
    for n in ns:
        sol = solve_hdg(build_uniform_1d(0, 1, n), k, REAL_K, ex.f, ex.g, gh_degree=2)
        rep = relative_errors(sol, ex, ustar=postprocess_all(sol, ex.f).coef)
        eu.append(rep.e_u)
        es.append(rep.e_ustar)
    slope = -np.polyfit(np.log(ns), np.log(es), 1)[0]
    assert slope == pytest.approx(3.0, abs=0.15)
    assert all(s <= u for s, u in zip(es, eu))


def test_singular_local_problem():
    h = 1.0
    X = np.array([[0.0], [h]])
    # 1D zero-mean P2 operator: det over the two modes vanishes at a discrete Neumann eigenvalue
    from hdg_helmholtz.basis import p2_local_matrices, simplex_geometry
    mats = p2_local_matrices(simplex_geometry(X[None]))
    mass0 = mats["mass"][0] - np.outer(mats["means"][0], mats["means"][0]) * h
    op = lambda k: mats["stiffness"][0][1:, 1:] - k * k * mass0[1:, 1:]
    from scipy.linalg import eigh
    lam = eigh(mats["stiffness"][0][1:, 1:], mass0[1:, 1:], eigvals_only=True)
    kres = np.sqrt(lam[0])
    assert abs(np.linalg.det(op(kres))) < 1e-10
    with pytest.raises(PostprocessSingularError) as exc:
        postprocess_element(X, 1.0, lambda x, n: np.zeros(x.shape[:-1]), None, kres)
    assert exc.value.kh == pytest.approx(kres * h)
