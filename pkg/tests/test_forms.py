import numpy as np
import pytest

from hdg_helmholtz.exact import bessel_solution_2d, plane_wave_1d
from hdg_helmholtz.forms import Integrator, energy_norm_sq, evaluate_A, magic_formula
from hdg_helmholtz.mesh import build_hexagon_equilateral, build_uniform_1d
from hdg_helmholtz.penalty import IMAG_K, REAL_K

from helpers import field_norm as _norm, random_pair as _random_pair, weak_form_residuals as _residuals

MESHES = {"1d": lambda: build_uniform_1d(0, 1, 7), "2d": lambda: build_hexagon_equilateral(3)}


@pytest.mark.parametrize("which", MESHES)
def test_variants_agree(which, rng):
    mesh = MESHES[which]()
    integ = Integrator(mesh, 8)
    tau = rng.normal(size=mesh.n_facets) + 1j * rng.normal(size=mesh.n_facets)
    for _ in range(10):
        trial, test = _random_pair(mesh, rng, 2), _random_pair(mesh, rng, 2)
        vals = [evaluate_A(v, trial, test, mesh, 2.0, tau, integrator=integ) for v in ("A", "A2", "A3")]
        assert abs(vals[1] - vals[0]) <= 1e-11 * abs(vals[0])
        assert abs(vals[2] - vals[0]) <= 1e-11 * abs(vals[0])


@pytest.mark.parametrize("which", MESHES)
def test_energy_identity(which, rng):
    mesh = MESHES[which]()
    integ = Integrator(mesh, 8)
    k = 2.0
    tau = np.abs(rng.normal(size=mesh.n_facets)) + 0.5
    v, r = _random_pair(mesh, rng, 2)
    lhs = evaluate_A("A", (v, r), (v, r), mesh, k, tau, integrator=integ).real + k * k * _norm(integ, v) ** 2
    rhs = energy_norm_sq(v, r, mesh, k, tau, integrator=integ)
    assert abs(lhs - rhs) <= 1e-11 * rhs


def test_energy_norm_requires_real_tau():
    mesh = MESHES["1d"]()
    v, r = _random_pair(mesh, np.random.default_rng(0), 1)
    with pytest.raises(ValueError):
        energy_norm_sq(v, r, mesh, 1.0, 1j)


@pytest.mark.parametrize("which", MESHES)
def test_magic_formula(which, rng):
    mesh = MESHES[which]()
    v, r = _random_pair(mesh, rng, 1)
    lhs, rhs = magic_formula(v, r, mesh)
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


def test_unknown_variant():
    mesh = MESHES["1d"]()
    p = _random_pair(mesh, np.random.default_rng(0), 1)
    with pytest.raises(ValueError):
        evaluate_A("B", p, p, mesh, 1.0, 1.0)


def test_consistency_and_orthogonality_1d():
    mesh = build_uniform_1d(0, 1, 10)
    cons, orth, disc = _residuals(mesh, plane_wave_1d(5.0), 5.0, REAL_K, range(mesh.n_cells))
    assert cons <= 1e-9 and orth <= 1e-9 and disc <= 1e-9


def test_orthogonality_1d_n20():
    mesh = build_uniform_1d(0, 1, 20)
    _, orth, _ = _residuals(mesh, plane_wave_1d(5.0), 5.0, REAL_K, range(mesh.n_cells))
    assert orth <= 1e-9


def test_consistency_and_orthogonality_2d():
    mesh = build_hexagon_equilateral(4)
    bnd_cells = np.unique(mesh.facet_cells[mesh.boundary, 0])
    cells = list(bnd_cells[:4]) + [int(np.argmin(np.linalg.norm(mesh.cell_coords.mean(axis=1), axis=1)))]
    cons, orth, disc = _residuals(mesh, bessel_solution_2d(3.0), 3.0, IMAG_K, cells)
    assert cons <= 1e-9 and orth <= 1e-9 and disc <= 1e-9
