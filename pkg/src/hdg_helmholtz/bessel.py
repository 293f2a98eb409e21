"""Bessel functions J0 and J1 of real argument.

Power series (summed in extended precision) for |z| <= SEAM and the Hankel
asymptotic expansion, truncated at its smallest term, above it. Absolute
error is below 1e-12 on [0, 1000].
"""
from __future__ import annotations

import math

import numpy as np

SEAM = 16.0
_SERIES_TERMS = 60
_HANKEL_TERMS = 40


def _series(order: int, z: np.ndarray) -> np.ndarray:
    x = np.asarray(z, dtype=np.longdouble) / 2
    x2 = x * x
    term = x**order / math.factorial(order)
    total = term.copy()
    for m in range(_SERIES_TERMS):
        term = -term * x2 / ((m + 1) * (m + 1 + order))
        total += term
    return total.astype(float)


def _hankel_coeffs(order: int) -> list[float]:
    mu = 4.0 * order * order
    a = [1.0]
    for k in range(1, 2 * _HANKEL_TERMS + 2):
        a.append(a[-1] * (mu - (2 * k - 1) ** 2) / (k * 8.0))
    return a


_HANKEL = {0: _hankel_coeffs(0), 1: _hankel_coeffs(1)}


def _hankel(order: int, z: np.ndarray) -> np.ndarray:
    a = _HANKEL[order]
    P = np.zeros_like(z)
    Q = np.zeros_like(z)
    prev = np.full_like(z, np.inf)
    live = np.ones(z.shape, dtype=bool)
    inv = 1.0 / z
    for k in range(_HANKEL_TERMS):
        tp = (-1) ** k * a[2 * k] * inv ** (2 * k)
        tq = (-1) ** k * a[2 * k + 1] * inv ** (2 * k + 1)
        size = np.abs(tp) + np.abs(tq)
        # stop each lane once the asymptotic terms start growing
        live &= size < prev
        P += np.where(live, tp, 0.0)
        Q += np.where(live, tq, 0.0)
        prev = np.where(live, size, prev)
        if not live.any():
            break
    chi = z - (order / 2 + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * z)) * (P * np.cos(chi) - Q * np.sin(chi))


def bessel_j(order: int, z):
    """J_order(z) for order 0 or 1; scalar in, scalar out."""
    if order not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {order}")
    arr = np.asarray(z, dtype=float)
    az = np.abs(arr)
    out = np.empty_like(az)
    small = az <= SEAM
    if small.any():
        out[small] = _series(order, az[small])
    if (~small).any():
        out[~small] = _hankel(order, az[~small])
    if order == 1:
        out = np.where(arr < 0, -out, out)
    if out.ndim == 0:
        return float(out)
    return out


def j0(z):
    return bessel_j(0, z)


def j1(z):
    return bessel_j(1, z)
