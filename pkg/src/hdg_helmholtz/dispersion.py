"""Discrete wave numbers of the linear HDG method.

1D: closed forms for the interior trace stencil
``S û_{i-1} + R û_i + S û_{i+1} = 0`` (t = kh, s = tau h), the quadratic
satisfied by ``delta = t_h^2 - t^2`` and the dispersion-free penalty tau_o.
The discrete wave number k_h is defined by requiring the nodal interpolant of
e^{ikx} to annihilate the stencil built with k_h, i.e.
``R(t_h, s) + 2 S(t_h, s) cos t = 0`` with s held fixed.

2D: a Bloch analysis on the equilateral lattice. One period cell holds an
up and a down triangle and three edge orientations with two trace dofs each.
The element Schur complements are computed with the true k; the trial wave
vector k_trial (cos theta, sin theta) enters through quasi-periodic phase
factors, and k_h(theta) is the root of the 6x6 determinant nearest k.

Phase errors at kh <= 1e-2 lie far below double-precision resolution of k,
so everything here is evaluated with mpmath.
"""
from __future__ import annotations

from dataclasses import dataclass

import mpmath as mp
import numpy as np

from .penalty import PenaltyRule

DPS = 50


class ResonanceError(ArithmeticError):
    """A stencil denominator (12 + 2s - t^2)(6s - t^2) vanishes."""


class DegenerateQuadraticError(ArithmeticError):
    """Leading coefficient a2 of the delta quadratic is zero."""


class BranchAmbiguityError(ArithmeticError):
    """Neither root of the delta quadratic is close to t^2."""


class OutOfRangeError(ValueError):
    """kh outside the range covered by the closed forms."""


class RootNotFoundError(ArithmeticError):
    """No Bloch root within |k_h - k| <= 0.3 k."""


def _mpc(z):
    return mp.mpc(complex(z)) if not isinstance(z, (mp.mpf, mp.mpc)) else mp.mpc(z)


def _mpf(x):
    return mp.mpf(x) if not isinstance(x, mp.mpf) else x


# ---------------------------------------------------------------------------
# 1D closed forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StencilCoefficients:
    S: complex
    R: complex


def _stencil_mp(t, s):
    t2 = t * t
    den = (12 + 2 * s - t2) * (6 * s - t2)
    scale = (12 + 2 * abs(s) + abs(t2)) * (6 * abs(s) + abs(t2))
    if abs(den) <= mp.mpf("1e-12") * scale:
        raise ResonanceError(f"stencil denominator vanishes at t={mp.nstr(t, 8)}, s={mp.nstr(s, 8)}")
    S = -1 - t2 * (12 * s - 3 * t2 + 2 * s * s) / den
    R = 2 - 2 * t2 * (24 * s - 3 * t2 + 4 * s * s - t2 * s) / den
    return S, R


def stencil_1d(t: float, s: complex) -> StencilCoefficients:
    """Interior trace stencil coefficients for t = kh, s = tau h."""
    with mp.workdps(DPS):
        S, R = _stencil_mp(_mpf(t), _mpc(s))
        return StencilCoefficients(complex(S), complex(R))


def quadratic_coefficients(t, s):
    """(a2, a1, a0, b) of ``a2 delta^2 + a1 delta + a0 = 0`` as mpmath numbers."""
    t = _mpf(t)
    s = _mpc(s)
    t2 = t * t
    c = mp.cos(t)
    b = 1 - t2 / 2 - c
    a2 = 4 + s + 2 * c
    a1 = (12 - 4 * s - 2 * s * s + 4 * t2) * (c - 1) - 2 * (6 + s) * (3 * s - t2)
    a0 = (2 * b * (t2 + 6) + t2 * t2) * (s * s - t2) + (4 * b * (t2 + 18) + 3 * t2 * t2) * s
    return a2, a1, a0, b


@dataclass(frozen=True)
class Dispersion1D:
    """Discrete wave number data; complex values are mpmath numbers."""

    k: float
    h: float
    t: mp.mpf
    s: mp.mpc
    b: mp.mpf
    a0: mp.mpc
    a1: mp.mpc
    a2: mp.mpc
    delta: mp.mpc
    t_h: mp.mpc
    k_h: mp.mpc
    printed_branch: bool  # chosen root is the -a1 - sqrt(a1^2 - 4 a0 a2) one

    @property
    def phase_error(self) -> mp.mpc:
        """k_h - k."""
        with mp.workdps(DPS):
            return self.k_h - _mpf(self.k)

    @property
    def quadratic_residual(self) -> float:
        with mp.workdps(DPS):
            r = self.a2 * self.delta ** 2 + self.a1 * self.delta + self.a0
            # delta is O(t^2); measure against the natural size of each term
            t2 = self.t * self.t
            scale = abs(self.a2) * t2 * t2 + abs(self.a1) * t2 + abs(self.a0)
            return float(abs(r) / scale)


def discrete_wavenumber_1d(k: float, h: float, tau: complex) -> Dispersion1D:
    """Closed-form k_h for t = kh <= pi, taking the root delta of smaller modulus."""
    with mp.workdps(DPS):
        k_ = _mpf(k)
        h_ = _mpf(h)
        t = k_ * h_
        if not 0 < t <= mp.pi:
            raise OutOfRangeError(f"kh = {float(t):g} outside (0, pi]")
        s = _mpc(tau) * h_
        _stencil_mp(t, s)  # resonance check
        a2, a1, a0, b = quadratic_coefficients(t, s)
        if abs(a2) == 0:
            raise DegenerateQuadraticError(f"a2 = 0 at t={float(t):g}")
        root = mp.sqrt(a1 * a1 - 4 * a0 * a2)
        printed = (-a1 - root) / (2 * a2)
        other = (-a1 + root) / (2 * a2)
        delta = printed if abs(printed) <= abs(other) else other
        if abs(delta) > t * t:
            raise BranchAmbiguityError(f"both delta roots exceed t^2 at t={float(t):g}")
        t_h = mp.sqrt(t * t + delta)
        return Dispersion1D(float(k), float(h), t, s, b, a0, a1, a2, delta, t_h, t_h / h_,
                            delta is printed)


def tau_opt_1d(k: float, h: float) -> mp.mpf:
    """Penalty with a0 = 0, hence k_h = k exactly (real and positive for kh in (0, pi])."""
    with mp.workdps(DPS):
        k_ = _mpf(k)
        t = k_ * _mpf(h)
        if not 0 < t <= mp.pi:
            raise OutOfRangeError(f"kh = {float(t):g} outside (0, pi]")
        t2 = t * t
        b = 1 - t2 / 2 - mp.cos(t)
        P = 4 * b * (t2 + 18) + 3 * t2 * t2
        Q = 4 * b * (t2 * t + 6 * t) + 2 * t2 * t2 * t
        return +(k_ * (mp.sqrt(P * P + Q * Q) - P) / Q)


def stencil_residual_1d(t_h, t, s):
    """R(t_h, s) + 2 S(t_h, s) cos t: zero at the discrete wave number."""
    S, R = _stencil_mp(t_h, s)
    return R + 2 * S * mp.cos(t)


def secant_wavenumber_1d(k: float, h: float, tau: complex) -> mp.mpc:
    """k_h by a secant search on the stencil equation (independent of the quadratic)."""
    with mp.workdps(DPS):
        h_ = _mpf(h)
        t = _mpf(k) * h_
        s = _mpc(tau) * h_
        th = mp.findroot(lambda x: stencil_residual_1d(x, t, s), (t, t * (1 + mp.mpf("1e-3"))),
                         solver="secant", tol=mp.mpf(10) ** (-2 * DPS // 3), maxsteps=200)
        return th / h_


def bloch_wavenumber_1d(k: float, h: float, tau: complex) -> mp.mpc:
    """Wave number of the discrete plane wave of the stencil built with the true k.

    Solves S(t, s) e^{-i k_h h} + R(t, s) + S(t, s) e^{i k_h h} = 0; to leading
    order its error has the same modulus as the stencil-side definition.
    """
    with mp.workdps(DPS):
        h_ = _mpf(h)
        S, R = _stencil_mp(_mpf(k) * h_, _mpc(tau) * h_)
        return mp.acos(-R / (2 * S)) / h_


def _penalty_value(rule, k: float, h: float) -> complex:
    if isinstance(rule, PenaltyRule):
        return complex(rule(k, h))
    if callable(rule):
        return complex(rule(k, h))
    return complex(rule)


@dataclass(frozen=True)
class PhaseErrorCurve:
    h: np.ndarray
    error: np.ndarray  # |k_h - k|
    signed: np.ndarray  # k_h - k (complex)
    slope: float
    order: int
    coefficient: complex  # (k_h - k) / (k^{p+1} h^p) at the finest h

    @property
    def coefficient_abs(self) -> float:
        return abs(self.coefficient)


def _fit(h, err, signed, k):
    slope = float(np.polyfit(np.log(h), np.log(err), 1)[0])
    p = int(round(slope))
    i = int(np.argmin(h))
    coef = complex(signed[i]) / (k ** (p + 1) * h[i] ** p)
    return slope, p, coef


def phase_error_curve_1d(k: float, rule, hs) -> PhaseErrorCurve:
    """Phase errors along ``hs``; slope by least squares on log-log data."""
    hs = np.asarray(hs, dtype=float)
    vals = []
    for h in hs:
        if k * h > np.pi:
            raise OutOfRangeError(f"kh = {k * h:g} exceeds pi")
        vals.append(complex(discrete_wavenumber_1d(k, h, _penalty_value(rule, k, h)).phase_error))
    signed = np.array(vals)
    err = np.abs(signed)
    slope, p, coef = _fit(hs, err, signed, k)
    return PhaseErrorCurve(hs, err, signed, slope, p, coef)


# ---------------------------------------------------------------------------
# 2D Bloch analysis on the equilateral lattice
# ---------------------------------------------------------------------------

# local trace slot (facet j, vertex a) -> (edge type, end, cell offset)
# types: 0 horizontal [v(i,j), v(i+1,j)], 1 along a2 [v(i,j), v(i,j+1)],
#        2 diagonal [v(i+1,j), v(i,j+1)]
_UP_SLOTS = [(2, 0, (0, 0)), (2, 1, (0, 0)),
             (1, 0, (0, 0)), (1, 1, (0, 0)),
             (0, 0, (0, 0)), (0, 1, (0, 0))]
_DOWN_SLOTS = [(0, 1, (0, 1)), (0, 0, (0, 1)),
               (2, 0, (0, 0)), (2, 1, (0, 0)),
               (1, 0, (1, 0)), (1, 1, (1, 0))]


def _lattice_cells(h):
    a1 = np.array([h, 0 * h], dtype=object)
    a2 = np.array([h / 2, h * mp.sqrt(3) / 2], dtype=object)

    def v(i, j):
        return i * a1 + j * a2

    up = np.array([v(0, 0), v(1, 0), v(0, 1)], dtype=object)
    down = np.array([v(1, 0), v(1, 1), v(0, 1)], dtype=object)
    return np.stack([up, down]), a1, a2


class BlochOperator:
    """Condensed period-cell operator for fixed (k, h, tau); cheap to evaluate at any k_trial."""

    def __init__(self, k: float, h: float, tau: complex, dps: int = DPS):
        from .basis import simplex_geometry
        from .hdg import local_blocks
        from .linalg import batched_solve

        self.dps = dps
        with mp.workdps(dps):
            self.k = mp.mpmathify(k)
            self.h = _mpf(h)
            self.tau = _mpc(tau)
            X, self.a1, self.a2 = _lattice_cells(self.h)
            geom = simplex_geometry(X)
            tau_cell = np.full((2, 3), self.tau, dtype=object)
            A, B, C, D = local_blocks(geom, self.k, tau_cell)
            AinvB, _ = batched_solve(A, B, rtol=1e-30)
            self.schur = np.einsum("etn,enc->etc", C, AinvB) - D  # (2, 6, 6)

    def matrix(self, k_trial, theta) -> mp.matrix:
        with mp.workdps(self.dps):
            kt = _mpc(k_trial)
            th = _mpf(theta)
            kx, ky = kt * mp.cos(th), kt * mp.sin(th)
            phase = {}
            for p in (0, 1):
                for q in (0, 1):
                    off = p * self.a1 + q * self.a2
                    phase[(p, q)] = mp.expj(kx * off[0] + ky * off[1])
            M = mp.matrix(6, 6)
            for e, slots in enumerate((_UP_SLOTS, _DOWN_SLOTS)):
                S = self.schur[e]
                for a, (ta, ea, oa) in enumerate(slots):
                    ra = 2 * ta + ea
                    # row equation shifted back to the reference cell
                    pa = 1 / phase[oa]
                    for b, (tb, eb, ob) in enumerate(slots):
                        M[ra, 2 * tb + eb] += S[a, b] * phase[ob] * pa
            return M

    def det(self, k_trial, theta):
        with mp.workdps(self.dps):
            return mp.det(self.matrix(k_trial, theta))

    def wavenumber(self, theta, maxsteps: int = 50) -> mp.mpc:
        """Secant root of det nearest k, started at k and k (1 + 1e-3)."""
        with mp.workdps(self.dps):
            k = self.k
            x0, x1 = mp.mpc(k), mp.mpc(k * (1 + mp.mpf("1e-3")))
            f0, f1 = self.det(x0, theta), self.det(x1, theta)
            tol = mp.mpf("1e-12") * k
            for _ in range(maxsteps):
                if f1 == f0:
                    break
                x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
                x0, f0 = x1, f1
                x1, f1 = x2, self.det(x2, theta)
                if abs(x1 - x0) <= tol * mp.mpf("1e-20"):
                    break
            if not abs(x1 - k) <= mp.mpf("0.3") * k:
                raise RootNotFoundError(f"no Bloch root near k={float(k):g} at theta={float(theta):g}")
            return x1


def bloch_matrix_2d(k_trial, k: float, h: float, tau: complex, theta: float) -> np.ndarray:
    """6x6 Bloch matrix as a complex array."""
    M = BlochOperator(k, h, tau).matrix(k_trial, theta)
    return np.array([[complex(M[i, j]) for j in range(6)] for i in range(6)])


def discrete_wavenumber_2d(k: float, h: float, tau: complex, theta: float) -> complex:
    if k * h > 1.5:
        raise OutOfRangeError(f"kh = {k * h:g} exceeds 1.5")
    return complex(BlochOperator(k, h, tau).wavenumber(theta))


DEFAULT_ANGLES = tuple(j * np.pi / 60 for j in range(20))


@dataclass(frozen=True)
class Dispersion2D:
    k: float
    h: float
    tau: complex
    angles: tuple
    k_h: tuple  # mpmath values per angle

    @property
    def max_phase_error(self) -> float:
        with mp.workdps(DPS):
            return float(max(abs(kh - _mpf(self.k)) for kh in self.k_h))

    @property
    def worst_angle(self) -> float:
        with mp.workdps(DPS):
            errs = [abs(kh - _mpf(self.k)) for kh in self.k_h]
        return float(self.angles[int(np.argmax(errs))])


def dispersion_2d(k: float, h: float, tau: complex, angles=DEFAULT_ANGLES) -> Dispersion2D:
    if k * h > 1.5:
        raise OutOfRangeError(f"kh = {k * h:g} exceeds 1.5")
    op = BlochOperator(k, h, tau)
    return Dispersion2D(float(k), float(h), complex(tau), tuple(angles),
                        tuple(op.wavenumber(th) for th in angles))


def phase_error_curve_2d(k: float, rule, hs, angles=DEFAULT_ANGLES) -> PhaseErrorCurve:
    """max over angles of |k_h - k| along ``hs``."""
    hs = np.asarray(hs, dtype=float)
    signed = []
    for h in hs:
        res = dispersion_2d(k, h, _penalty_value(rule, k, h), angles)
        with mp.workdps(DPS):
            i = int(np.argmax([abs(kh - _mpf(res.k)) for kh in res.k_h]))
            signed.append(complex(res.k_h[i] - _mpf(res.k)))
    signed = np.array(signed)
    err = np.abs(signed)
    slope, p, coef = _fit(hs, err, signed, k)
    return PhaseErrorCurve(hs, err, signed, slope, p, coef)
