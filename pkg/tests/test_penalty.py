import numpy as np
import pytest

from hdg_helmholtz.penalty import (
    CORRECTED_1D, CORRECTED_2D, IMAG_K, IMAG_OVER_H, REAL_K, TAU_OPT_1D, InvalidPenaltyError,
    PenaltyRule, eval_penalty,
)


def test_imag_k():
    assert eval_penalty(IMAG_K, 100, 0.01) == 100j


def test_corrected_1d():
    assert eval_penalty(CORRECTED_1D, 100, 0.01) == pytest.approx(100 * (1 + 1 / 15), rel=1e-15)


def test_corrected_2d():
    val = eval_penalty(CORRECTED_2D, 64, 1 / 64)
    assert val == pytest.approx(np.sqrt(2) / 2 * 64 * (1 + np.sqrt(3) / 64), rel=1e-15)


def test_simple_rules():
    assert eval_penalty(IMAG_OVER_H, 3.0, 0.25) == 4j
    assert eval_penalty(REAL_K, 3.0, 0.25) == 3.0


def test_tau_opt_close_to_corrected():
    k, h = 10.0, 1e-4
    assert abs(eval_penalty(TAU_OPT_1D, k, h) / k - (1 + k * h / 15)) < 1e-5


def test_vectorised():
    tau = IMAG_OVER_H(2.0, np.array([0.5, 0.25]))
    np.testing.assert_array_equal(tau, [2j, 4j])


@pytest.mark.parametrize("value", [-10j, 0])
def test_invalid_constant(value):
    with pytest.raises(InvalidPenaltyError):
        PenaltyRule("const", value)(10.0, 0.1)


def test_outside_theory_tag():
    assert PenaltyRule("const", -1 + 1j).outside_theory
    assert not PenaltyRule("const", 1 + 1j).outside_theory
    assert not REAL_K.outside_theory


@pytest.mark.parametrize("text,kind", [("imag-k", "imag-k"), ("k-corr-2d", "k-corr-2d"), ("const:1.5,-2", "const")])
def test_parse(text, kind):
    r = PenaltyRule.parse(text)
    assert r.kind == kind
    if kind == "const":
        assert r.value == 1.5 - 2j and r.tag == "const:1.5,-2"


def test_unknown_rule():
    with pytest.raises(ValueError):
        PenaltyRule.parse("bogus")


@pytest.mark.parametrize("k,h", [(0, 0.1), (1, 0), (-1, 0.1)])
def test_bad_arguments(k, h):
    with pytest.raises(ValueError):
        REAL_K(k, h)
