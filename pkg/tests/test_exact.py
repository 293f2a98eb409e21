import numpy as np
import pytest
from scipy import special

from hdg_helmholtz.bessel import SEAM, _hankel, _series, bessel_j, j0, j1
from hdg_helmholtz.exact import bessel_solution_2d, plane_wave_1d


def test_plane_wave_boundary_data():
    ex = plane_wave_1d(10.0)
    x = np.array([[0.0], [1.0]])
    n = np.array([[-1.0], [1.0]])
    np.testing.assert_allclose(ex.g(x, n), [1.0, 1.0], atol=1e-13)
    assert np.all(ex.f(x) == 0)


def test_plane_wave_value_at_origin():
    ex = plane_wave_1d(10.0)
    assert ex.u(np.array([0.0]))[()] == pytest.approx((1 + np.exp(-10j)) / 20j, abs=1e-15)


@pytest.mark.parametrize("k", [0.5, 10.0, 300.0])
def test_plane_wave_solves_helmholtz(k):
    ex = plane_wave_1d(k)
    x = np.linspace(0.05, 0.95, 17)[:, None]
    hh = 1e-3 / k
    upp = (ex.u(x + hh) - 2 * ex.u(x) + ex.u(x - hh)) / hh ** 2
    np.testing.assert_allclose(-upp - k * k * ex.u(x), 0, atol=1e-5 * k)
    # analytic second derivative: u'' = -k^2 u
    du = ex.grad_u(x)[..., 0]
    np.testing.assert_allclose((ex.grad_u(x + hh)[..., 0] - ex.grad_u(x - hh)[..., 0]) / (2 * hh),
                               -k * k * ex.u(x), rtol=1e-5, atol=1e-8 * k)
    assert du.shape == x.shape[:1]


@pytest.mark.parametrize("k", [0.0, -1.0])
def test_invalid_k(k):
    with pytest.raises(ValueError):
        plane_wave_1d(k)
    with pytest.raises(ValueError):
        bessel_solution_2d(k)


def test_bessel_at_zero():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(1, 0.0) == 0.0


def _series_oracle(order, z, terms=40):
    # independent power series with exact rational coefficients in float
    s, term = 0.0, (z / 2) ** order
    from math import factorial
    for m in range(terms):
        s += (-1) ** m * (z / 2) ** (2 * m + order) / (factorial(m) * factorial(m + order))
    return s


def test_first_zero_of_j0():
    lo, hi = 2.0, 3.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _series_oracle(0, lo) * _series_oracle(0, mid) <= 0:
            hi = mid
        else:
            lo = mid
    assert lo == pytest.approx(2.404825557695773, abs=1e-13)
    assert abs(j0(lo)) < 1e-13


def test_derivative_identity():
    z = np.linspace(0.3, 60, 41)
    dz = 1e-5
    np.testing.assert_allclose((j0(z + dz) - j0(z - dz)) / (2 * dz), -j1(z), atol=1e-10)


def test_parity():
    z = np.array([0.7, 5.0, 30.0])
    np.testing.assert_array_equal(j0(-z), j0(z))
    np.testing.assert_array_equal(j1(-z), -j1(z))


@pytest.mark.parametrize("order", [0, 1])
def test_against_scipy(order):
    z = np.concatenate([np.linspace(0, 20, 2001), np.linspace(20, 1000, 4001)])
    ref = special.jv(order, z)
    np.testing.assert_allclose(bessel_j(order, z), ref, rtol=0, atol=1e-12)


@pytest.mark.parametrize("order", [0, 1])
def test_seam_continuity(order):
    z = np.array([SEAM])
    assert abs(_series(order, z)[0] - _hankel(order, z)[0]) < 1e-12
    assert abs(bessel_j(order, SEAM) - special.jv(order, SEAM)) < 1e-13


def test_bessel_gradient_at_origin():
    ex = bessel_solution_2d(5.0)
    np.testing.assert_array_equal(ex.grad_u(np.zeros((1, 2))), 0.0)


def test_bessel_solves_helmholtz_fd():
    k, r = 5.0, 0.37
    ex = bessel_solution_2d(k)
    x = np.array([r * np.cos(0.3), r * np.sin(0.3)])
    hh = 1e-3
    lap = 0.0
    for e in np.eye(2):
        c = [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12]
        pts = np.array([x + s * hh * e for s in (-2, -1, 0, 1, 2)])
        lap += np.dot(c, ex.u(pts).real) / hh ** 2
    assert abs(-lap - k * k * ex.u(x).real) < 1e-6


def test_bessel_boundary_datum():
    ex = bessel_solution_2d(1.0)
    g = ex.g(np.array([1.0, 0.0]), np.array([1.0, 0.0]))
    assert g == pytest.approx(-special.j1(1.0) + 1j * special.j0(1.0), abs=1e-14)


@pytest.mark.parametrize("make", [plane_wave_1d, bessel_solution_2d])
def test_g_consistency(make, rng):
    ex = make(7.0)
    x = rng.uniform(-1, 1, size=(100, ex.dim))
    n = rng.normal(size=(100, ex.dim))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    direct = np.sum(ex.grad_u(x) * n, axis=1) + 1j * 7.0 * ex.u(x)
    np.testing.assert_allclose(ex.g(x, n), direct, rtol=1e-12, atol=1e-14)
    assert np.all(ex.f(x) == 0)
