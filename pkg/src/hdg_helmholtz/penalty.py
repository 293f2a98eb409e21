"""Penalty (stabilization) parameter rules, evaluated edgewise."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class InvalidPenaltyError(ValueError):
    """tau = 0 or tau + i k = 0 on some facet."""


KINDS = ("imag-over-h", "imag-k", "k", "k-corr-1d", "tau-opt-1d", "k-corr-2d", "const")


@dataclass(frozen=True)
class PenaltyRule:
    """One of the fixed rules, or ``const`` with a user value.

    ``imag-over-h``  tau = i/h
    ``imag-k``       tau = i k
    ``k``            tau = k
    ``k-corr-1d``    tau = k (1 + kh/15)
    ``tau-opt-1d``   the 1D dispersion-free value (see ``dispersion.tau_opt_1d``)
    ``k-corr-2d``    tau = (sqrt(2)/2) k (1 + (sqrt(3)/64) kh)
    """

    kind: str
    value: complex = 0j

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown penalty rule {self.kind!r}; expected one of {KINDS}")
        if self.kind == "const":
            v = complex(self.value)
            if v == 0:
                raise InvalidPenaltyError("constant penalty must be nonzero")
            object.__setattr__(self, "value", v)

    @property
    def tag(self) -> str:
        if self.kind == "const":
            return f"const:{self.value.real:g},{self.value.imag:g}"
        return self.kind

    @property
    def outside_theory(self) -> bool:
        """True for constants not covered by the error analysis (needs Re, Im >= 0)."""
        if self.kind != "const":
            return False
        return self.value.real < 0 or self.value.imag < 0

    def __call__(self, k: float, h):
        """Evaluate tau for wave number ``k`` and facet size(s) ``h``."""
        if not k > 0:
            raise ValueError(f"k must be positive, got {k}")
        h_arr = np.asarray(h, dtype=float)
        if np.any(h_arr <= 0):
            raise ValueError("facet size must be positive")
        t = k * h_arr
        kind = self.kind
        if kind == "imag-over-h":
            tau = 1j / h_arr
        elif kind == "imag-k":
            tau = np.full(h_arr.shape, 1j * k)
        elif kind == "k":
            tau = np.full(h_arr.shape, k + 0j)
        elif kind == "k-corr-1d":
            tau = k * (1 + t / 15) + 0j
        elif kind == "k-corr-2d":
            tau = np.sqrt(2) / 2 * k * (1 + np.sqrt(3) / 64 * t) + 0j
        elif kind == "tau-opt-1d":
            uniq, inv = np.unique(h_arr.ravel(), return_inverse=True)
            vals = np.array([_tau_opt(float(k), float(hh)) for hh in uniq], dtype=complex)
            tau = vals[inv].reshape(h_arr.shape)
        else:
            tau = np.full(h_arr.shape, self.value)
        tau = np.asarray(tau, dtype=complex)
        if np.any(tau == 0) or np.any(np.abs(tau + 1j * k) <= 1e-14 * k):
            raise InvalidPenaltyError(f"penalty {self.tag} violates tau != 0, tau + ik != 0 at k={k}")
        return tau if tau.ndim else complex(tau)

    @classmethod
    def parse(cls, text: str) -> "PenaltyRule":
        """Parse CLI syntax: a rule name or ``const:<re>,<im>``."""
        text = text.strip()
        if text.startswith("const:"):
            re_, _, im_ = text[6:].partition(",")
            return cls("const", complex(float(re_), float(im_ or 0.0)))
        return cls(text)


@lru_cache(maxsize=4096)
def _tau_opt(k: float, h: float) -> complex:
    from .dispersion import tau_opt_1d
    return complex(tau_opt_1d(k, h))


def eval_penalty(rule: PenaltyRule, k: float, h_edge: float) -> complex:
    return complex(rule(k, h_edge))


IMAG_OVER_H = PenaltyRule("imag-over-h")
IMAG_K = PenaltyRule("imag-k")
REAL_K = PenaltyRule("k")
CORRECTED_1D = PenaltyRule("k-corr-1d")
TAU_OPT_1D = PenaltyRule("tau-opt-1d")
CORRECTED_2D = PenaltyRule("k-corr-2d")
