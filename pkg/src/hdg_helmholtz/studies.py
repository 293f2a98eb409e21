"""Study drivers: convergence, pollution, critical mesh size, postprocessing and dispersion.

The 1D problem is the plane wave on [0, 1]; the 2D problem is J0(kr) on the
unit hexagon. Every (k, mesh, rule) cell yields one :class:`SweepRecord`;
failures are recorded with a reason instead of aborting the sweep.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import mpmath as mp
import numpy as np

from .exact import bessel_solution_2d, plane_wave_1d
from .hdg import solve_hdg
from .mesh import MeshError, build_hexagon_equilateral, build_uniform_1d
from .penalty import InvalidPenaltyError, PenaltyRule
from .postprocess import postprocess_all
from .projections import relative_errors

# failures that are recorded per cell rather than raised
CELL_ERRORS = (ArithmeticError, InvalidPenaltyError, MeshError)


class BudgetError(RuntimeError):
    """Critical mesh search exceeded the element budget."""


@dataclass
class SweepRecord:
    study: str
    dim: int
    k: float
    h: float
    n: int
    rule: str
    tau_re: float
    tau_im: float
    e_u: float
    e_q: float
    e_uI: float
    e_qI: float
    e_ustar: float | None
    dofs: int
    outside_theory: bool
    status: str
    reason: str
    wall_time: float


@dataclass
class CriticalMeshResult:
    k: float
    eps: float
    quantity: str
    rule: str
    h: float
    n: int
    error: float
    error_coarser: float


@dataclass
class DispersionRecord:
    dim: int
    k: float
    h: float
    rule: str
    tau_re: float
    tau_im: float
    kh_re: float
    kh_im: float
    phase_error: float


# ---------------------------------------------------------------------------
# single cells
# ---------------------------------------------------------------------------

def build_problem(dim: int, k: float, n: int):
    """Mesh with ``n`` elements (1D) or ``n`` subdivisions per hexagon side (2D), and the exact solution."""
    if dim == 1:
        return build_uniform_1d(0.0, 1.0, n), plane_wave_1d(k)
    if dim == 2:
        return build_hexagon_equilateral(n), bessel_solution_2d(k)
    raise ValueError(f"dim must be 1 or 2, got {dim}")


def n_for_h(dim: int, h: float) -> int:
    """Element count (1D) or side subdivisions (2D) for the mesh size ``h`` of the unit-length geometry."""
    n = int(round(1.0 / h))
    return max(n, 2 if dim == 1 else 1)


def n_for_kh(dim: int, k: float, kh: float) -> int:
    return n_for_h(dim, kh / k)


def run_cell(study: str, dim: int, k: float, n: int, rule: PenaltyRule, gh_degree: int = 1,
             postprocess: bool = False) -> SweepRecord:
    """Solve one configuration and measure its relative errors."""
    t0 = time.perf_counter()
    h = 1.0 / n
    nan = float("nan")
    base = dict(study=study, dim=dim, k=float(k), h=h, n=int(n), rule=rule.tag,
                outside_theory=rule.outside_theory)
    try:
        tau = complex(rule(k, h))
        base.update(tau_re=tau.real, tau_im=tau.imag)
        mesh, ex = build_problem(dim, k, n)
        sol = solve_hdg(mesh, k, rule, ex.f, ex.g, gh_degree=gh_degree)
        ustar = postprocess_all(sol, ex.f).coef if postprocess else None
        rep = relative_errors(sol, ex, ustar=ustar)
    except CELL_ERRORS as exc:
        base.setdefault("tau_re", nan)
        base.setdefault("tau_im", nan)
        return SweepRecord(**base, e_u=nan, e_q=nan, e_uI=nan, e_qI=nan, e_ustar=None,
                           dofs=0, status="failed", reason=f"{type(exc).__name__}: {exc}",
                           wall_time=time.perf_counter() - t0)
    return SweepRecord(**base, e_u=rep.e_u, e_q=rep.e_q, e_uI=rep.e_uI, e_qI=rep.e_qI,
                       e_ustar=rep.e_ustar, dofs=int(mesh.n_trace_dofs), status="ok", reason="",
                       wall_time=time.perf_counter() - t0)


def _run_cells(jobs: list[tuple], threads: int) -> list[SweepRecord]:
    if threads <= 1:
        return [run_cell(*j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda j: run_cell(*j), jobs))  # map keeps input order


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------

def run_convergence_study(k: float, hs: Sequence[float], rules: Sequence[PenaltyRule], dim: int = 1,
                          gh_degree: int = 1, threads: int = 1) -> list[SweepRecord]:
    """Errors versus 1/h at fixed k; one record per (rule, h)."""
    jobs = [("convergence", dim, k, n_for_h(dim, h), r, gh_degree, False) for r in rules for h in hs]
    return _run_cells(jobs, threads)


def run_postprocess_study(k: float, hs: Sequence[float], rules: Sequence[PenaltyRule], dim: int = 1,
                          gh_degree: int = 2, threads: int = 1) -> list[SweepRecord]:
    """Convergence study that also measures the postprocessed u*."""
    jobs = [("postprocess", dim, k, n_for_h(dim, h), r, gh_degree, True) for r in rules for h in hs]
    return _run_cells(jobs, threads)


def run_pollution_study(ks: Iterable[float], rules: Sequence[PenaltyRule], kh: float = 1.0, dim: int = 1,
                        gh_degree: int = 1, threads: int = 1) -> list[SweepRecord]:
    """Errors at fixed kh while k grows; one record per (rule, k)."""
    ks = list(ks)
    jobs = [("pollution", dim, k, n_for_kh(dim, k, kh), r, gh_degree, False) for r in rules for k in ks]
    return _run_cells(jobs, threads)


def critical_mesh_size(k: float, eps: float, quantity: str, rule: PenaltyRule, dim: int = 1,
                       n_max: int = 10**6) -> CriticalMeshResult:
    """Largest h = 1/n with relative error of ``quantity`` ('u' or 'q') at most ``eps``.

    Exponential bracketing from the coarsest mesh, then integer bisection. A
    candidate n is accepted only if n + 1 also meets the tolerance, which
    guards against plateaus of a non-monotone error curve. Solver failures
    count as an infinite error.
    """
    if not 0 < eps:
        raise ValueError("eps must be positive")
    if quantity not in ("u", "q"):
        raise ValueError("quantity must be 'u' or 'q'")
    n_min = 2 if dim == 1 else 1
    cache: dict[int, float] = {}

    def err(n: int) -> float:
        if n not in cache:
            rec = run_cell("critical-h", dim, k, n, rule)
            val = rec.e_u if quantity == "u" else rec.e_q
            cache[n] = val if np.isfinite(val) else math.inf
        return cache[n]

    def ok(n: int) -> bool:
        return err(n) <= eps and err(n + 1) <= eps

    hi = n_min
    while not ok(hi):
        hi *= 2
        if hi > n_max:
            raise BudgetError(f"no mesh with n <= {n_max} reaches eps={eps} (k={k}, rule={rule.tag})")
    lo = n_min - 1 if hi == n_min else hi // 2
    # invariant: ok(hi); lo fails or lies below the admissible range
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    coarser = err(hi - 1) if hi - 1 >= n_min else math.inf
    return CriticalMeshResult(float(k), float(eps), quantity, rule.tag, 1.0 / hi, hi, err(hi), coarser)


def critical_h_slope(results: Sequence[CriticalMeshResult]) -> float:
    """Least-squares slope of log h(k, eps) against log k."""
    k = np.array([r.k for r in results])
    h = np.array([r.h for r in results])
    return float(np.polyfit(np.log(k), np.log(h), 1)[0])


def run_dispersion_study(k: float, hs: Sequence[float], rules: Sequence[PenaltyRule],
                         dim: int = 1) -> list[DispersionRecord]:
    """Discrete wavenumbers (worst direction in 2D) along ``hs``."""
    from . import dispersion
    out = []
    for rule in rules:
        for h in hs:
            tau = complex(rule(k, h))
            if dim == 1:
                d = dispersion.discrete_wavenumber_1d(k, h, tau)
                kh, err = complex(d.k_h), float(abs(d.phase_error))
            else:
                res = dispersion.dispersion_2d(k, h, tau)
                with mp.workdps(dispersion.DPS):
                    z = max(res.k_h, key=lambda z: abs(z - mp.mpf(k)))
                    kh, err = complex(z), float(abs(z - mp.mpf(k)))
            out.append(DispersionRecord(dim, float(k), float(h), rule.tag, tau.real, tau.imag,
                                        kh.real, kh.imag, err))
    return out


def fitted_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log x, ignoring non-finite points."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    keep = np.isfinite(y) & (y > 0)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def emit_csv(records: Sequence, path, record_type=SweepRecord) -> None:
    """Header with all record fields, one row per record, full-precision reals, LF endings."""
    names = [f.name for f in fields(record_type)]
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for r in records:
                d = asdict(r)
                w.writerow([_fmt(d[n]) for n in names])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv(path) -> list[dict[str, str]]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


@dataclass
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    style: str = "solid"  # solid | dashed (interpolation baselines)


def reference_slope(x: Sequence[float], y_anchor: float, slope: float, label: str | None = None) -> Series:
    """Dotted guide line of the given slope through (x[0], y_anchor)."""
    x = np.asarray(x, float)
    return Series(label or f"slope {slope:g}", x, y_anchor * (x / x[0]) ** slope, "dotted")


def emit_svg(series: Sequence[Series], path, title: str = "", xlabel: str = "", ylabel: str = "") -> None:
    """Log-log plot: one line per series, dashed baselines, dotted slope guides, legend."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    styles = {"solid": "-", "dashed": "--", "dotted": ":"}
    plt.rcParams["svg.hashsalt"] = "hdg-helmholtz"
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for s in series:
        y = np.asarray(s.y, float)
        keep = np.isfinite(y) & (y > 0)
        ax.loglog(np.asarray(s.x, float)[keep], y[keep], styles[s.style],
                  marker="o" if s.style == "solid" else None, ms=3, label=s.label)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    if series:
        ax.legend(fontsize=7)
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OSError(f"cannot write SVG to {path}: {exc}") from exc
    finally:
        plt.close(fig)


def sweep_series(records: Sequence[SweepRecord], x: str, slopes: Sequence[float] = ()) -> list[Series]:
    """Series for error plots: e_u, e_q per rule, interpolation baselines and slope guides."""
    out: list[Series] = []
    rules = list(dict.fromkeys(r.rule for r in records))
    xv = (lambda r: 1.0 / r.h) if x == "1/h" else (lambda r: r.k)
    for rule in rules:
        rs = [r for r in records if r.rule == rule]
        out.append(Series(f"e_u {rule}", [xv(r) for r in rs], [r.e_u for r in rs]))
        out.append(Series(f"e_q {rule}", [xv(r) for r in rs], [r.e_q for r in rs]))
        if any(r.e_ustar is not None for r in rs):
            out.append(Series(f"e_u* {rule}", [xv(r) for r in rs],
                              [r.e_ustar if r.e_ustar is not None else np.nan for r in rs]))
    if records:
        first = [r for r in records if r.rule == rules[0]]
        xs = [xv(r) for r in first]
        out.append(Series("e_u interp", xs, [r.e_uI for r in first], "dashed"))
        out.append(Series("e_q interp", xs, [r.e_qI for r in first], "dashed"))
        y0 = next((r.e_uI for r in first if np.isfinite(r.e_uI)), 1.0)
        for p in slopes:
            out.append(reference_slope(xs, y0, p))
    return out
