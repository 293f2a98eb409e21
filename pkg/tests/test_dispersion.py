import mpmath as mp
import numpy as np
import pytest

from hdg_helmholtz.dispersion import (
    BlochOperator, OutOfRangeError, ResonanceError, bloch_wavenumber_1d, discrete_wavenumber_1d,
    discrete_wavenumber_2d, dispersion_2d, phase_error_curve_1d, quadratic_coefficients,
    secant_wavenumber_1d, stencil_1d, stencil_residual_1d, tau_opt_1d,
)
from hdg_helmholtz.penalty import CORRECTED_1D, IMAG_K, IMAG_OVER_H, REAL_K, TAU_OPT_1D


def test_stencil_small_t_limit():
    c = stencil_1d(1e-6, 1.0)
    assert c.S == pytest.approx(-1.0, abs=1e-9)
    assert c.R == pytest.approx(2.0, abs=1e-9)


def test_stencil_matches_consistent_laplacian():
    # R + 2 S cos t vanishes to O(t^4) relative to t^2 (consistency of the scheme)
    for s in (0.3, 1j, 2 + 1j):
        for t in (1e-2, 5e-3):
            c = stencil_1d(t, s)
            assert abs(c.R + 2 * c.S * np.cos(t)) <= 10 * t ** 4


def test_resonance_detected():
    t = 0.7
    with pytest.raises(ResonanceError):
        stencil_1d(t, t * t / 6)
    with pytest.raises(ResonanceError):
        stencil_1d(t, (t * t - 12) / 2)


def test_out_of_range():
    with pytest.raises(OutOfRangeError):
        discrete_wavenumber_1d(10.0, 0.5, 10.0)
    with pytest.raises(OutOfRangeError):
        discrete_wavenumber_2d(10.0, 0.2, 10.0, 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_quadratic_agrees_with_secant(seed):
    rng = np.random.default_rng(seed)
    for _ in range(10):
        t = rng.uniform(0.01, 1.5)
        s = complex(rng.uniform(0.1, 3.0), rng.uniform(-1.0, 3.0))
        k, h = 1.0, t
        try:
            d = discrete_wavenumber_1d(k, h, s / h)
        except ArithmeticError:
            continue
        ks = secant_wavenumber_1d(k, h, s / h)
        assert abs(d.k_h - ks) <= mp.mpf("1e-25") * abs(ks)
        assert d.quadratic_residual <= 1e-30


def test_quadratic_root_satisfies_stencil_equation():
    d = discrete_wavenumber_1d(20.0, 0.05, 20.0)
    with mp.workdps(50):
        r = stencil_residual_1d(d.t_h, d.t, d.s)
    assert abs(r) <= 1e-30


@pytest.mark.parametrize("tau", [10.0, 10j, 100j])
def test_bloch_definition_is_mirror_image(tau):
    # building the stencil with k instead of k_h flips the sign of the leading error term
    k = 10.0
    for h in (1e-2, 1e-3):
        a = discrete_wavenumber_1d(k, h, tau).phase_error
        with mp.workdps(50):
            b = bloch_wavenumber_1d(k, h, tau) - k
            assert abs(a + b) <= k * h * abs(a)


@pytest.mark.parametrize("t", [0.01, 0.3, 1.0, 2.0, np.pi])
def test_tau_opt_is_dispersion_free(t):
    k = 7.0
    h = t / k
    tau = tau_opt_1d(k, h)
    assert tau > 0
    with mp.workdps(50):
        a2, a1, a0, b = quadratic_coefficients(mp.mpf(k) * mp.mpf(h), tau * mp.mpf(h))
    assert abs(a0) <= mp.mpf("1e-35") * (abs(a1) + abs(a2))
    # rounding tau to double leaves an O(eps) perturbation
    assert abs(discrete_wavenumber_1d(k, h, complex(tau)).phase_error) <= 1e-14 * k


def test_tau_opt_expansion():
    # tau_o = k (1 + kh/15 + O((kh)^2)) at small kh
    k = 3.0
    for t in (1e-2, 5e-3):
        tau = float(tau_opt_1d(k, t / k))
        assert abs(tau / k - 1 - t / 15) <= t * t


@pytest.mark.parametrize("rule,order", [(IMAG_OVER_H, 2), (IMAG_K, 3), (REAL_K, 4), (CORRECTED_1D, 5)])
def test_1d_phase_error_orders(rule, order):
    curve = phase_error_curve_1d(10.0, rule, [1e-3, 5e-4, 2.5e-4])
    assert curve.slope == pytest.approx(order, abs=0.1)


def test_tau_opt_curve_is_flat_zero():
    curve = phase_error_curve_1d(10.0, TAU_OPT_1D, [1e-2, 5e-3])
    assert curve.error.max() <= 1e-20


@pytest.fixture(scope="module")
def bloch_op():
    return BlochOperator(5.0, 0.05, 5.0, dps=30)


def test_bloch_hexagonal_symmetry(bloch_op):
    th = 0.2
    k0 = bloch_op.wavenumber(th)
    for other in (th + np.pi / 3, -th, np.pi / 3 - th, th + np.pi):
        assert abs(bloch_op.wavenumber(other) - k0) <= 1e-18


def test_bloch_root_winding(bloch_op):
    # argument principle: det has exactly one zero inside a small circle around k_h
    th = 0.1
    kh = bloch_op.wavenumber(th)
    r = abs(kh - 5.0) * 0.5 + 1e-6
    n = 64
    with mp.workdps(30):
        vals = [bloch_op.det(kh + r * mp.expj(2 * mp.pi * j / n), th) for j in range(n + 1)]
        dphi = [mp.arg(vals[j + 1] / vals[j]) for j in range(n)]
    assert round(float(sum(dphi)) / (2 * np.pi)) == 1


def test_bloch_small_kh_limit():
    res = dispersion_2d(2.0, 1e-3, 2.0, angles=(0.0, 0.3))
    assert res.max_phase_error <= 1e-5


@pytest.mark.parametrize("tau,order", [(lambda k, h: 1j / h, 2), (lambda k, h: k, 3)])
def test_bloch_orders(tau, order):
    k = 4.0
    e1 = dispersion_2d(k, 0.01, tau(k, 0.01), angles=(0.25,)).max_phase_error
    e2 = dispersion_2d(k, 0.005, tau(k, 0.005), angles=(0.25,)).max_phase_error
    assert np.log2(e1 / e2) == pytest.approx(order, abs=0.15)


def test_bloch_inversion_symmetry(bloch_op):
    th = 0.4
    kt = mp.mpc(5.01, 0.002)
    with mp.workdps(30):
        d1, d2 = abs(bloch_op.det(kt, th)), abs(bloch_op.det(kt, th + np.pi))
    assert abs(d1 - d2) <= 1e-10 * d1


def test_bloch_matrix_at_true_k_is_near_singular_for_small_h(bloch_op):
    with mp.workdps(30):
        d_root = abs(bloch_op.det(bloch_op.wavenumber(0.0), 0.0))
        d_off = abs(bloch_op.det(mp.mpf(5.0) * mp.mpf("1.05"), 0.0))
    assert d_root <= mp.mpf("1e-15") * d_off
