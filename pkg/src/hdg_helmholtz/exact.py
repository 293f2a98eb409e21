"""Exact Helmholtz solutions used as test problems.

Both problems have ``f = 0``; the impedance datum is always derived from the
solution itself, ``g(x, n) = grad_u(x) . n + i k u(x)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bessel import j0, j1


@dataclass(frozen=True)
class ExactSolution:
    """Exact solution with data; all callables take points of shape (..., d)."""

    k: float
    dim: int
    u: Callable[[np.ndarray], np.ndarray]
    grad_u: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray], np.ndarray]
    name: str = ""
    # -Laplacian(u) = f + k^2 u, needed for div q in the A3 form
    div_q: Callable[[np.ndarray], np.ndarray] | None = None

    def q(self, x: np.ndarray) -> np.ndarray:
        return -self.grad_u(x)

    def g(self, x: np.ndarray, n: np.ndarray) -> np.ndarray:
        n = np.broadcast_to(np.asarray(n, dtype=float), np.shape(x))
        return np.sum(self.grad_u(x) * n, axis=-1) + 1j * self.k * self.u(x)


def _check_k(k: float) -> float:
    k = float(k)
    if not k > 0:
        raise ValueError(f"wave number must be positive, got {k}")
    return k


def plane_wave_1d(k: float) -> ExactSolution:
    """u = (e^{-ikx} + e^{ik(x-1)}) / (2ik) on (0, 1), so g(0) = g(1) = 1."""
    k = _check_k(k)
    c = 1.0 / (2j * k)

    def u(x):
        x = np.asarray(x, dtype=float)[..., 0]
        return c * (np.exp(-1j * k * x) + np.exp(1j * k * (x - 1.0)))

    def grad_u(x):
        x = np.asarray(x, dtype=float)[..., 0]
        du = 0.5 * (-np.exp(-1j * k * x) + np.exp(1j * k * (x - 1.0)))
        return du[..., None]

    def f(x):
        return np.zeros(np.shape(x)[:-1], dtype=complex)

    def div_q(x):
        return k * k * u(x)

    return ExactSolution(k, 1, u, grad_u, f, "plane_wave_1d", div_q)


def bessel_solution_2d(k: float) -> ExactSolution:
    """u = J0(k r); grad u = -k J1(k r) x / r, set to 0 at the origin."""
    k = _check_k(k)

    def u(x):
        x = np.asarray(x, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        return np.asarray(j0(k * r), dtype=complex)

    def grad_u(x):
        x = np.asarray(x, dtype=float)
        r = np.hypot(x[..., 0], x[..., 1])
        safe = np.where(r < 1e-14, 1.0, r)
        fac = np.where(r < 1e-14, 0.0, -k * np.asarray(j1(k * r)) / safe)
        return (fac[..., None] * x).astype(complex)

    def f(x):
        return np.zeros(np.shape(x)[:-1], dtype=complex)

    def div_q(x):
        return k * k * u(x)

    return ExactSolution(k, 2, u, grad_u, f, "bessel_solution_2d", div_q)
