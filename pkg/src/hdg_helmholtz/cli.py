"""Command line interface: ``hdg-helmholtz <study> [options]``.

Exit codes: 0 on success, 2 if any study cell failed, 1 on invalid
arguments or I/O errors.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import studies
from .mesh import MeshError, dump_mesh
from .penalty import InvalidPenaltyError, PenaltyRule

DEFAULT_RULES = {
    1: ["imag-over-h", "imag-k", "k", "k-corr-1d"],
    2: ["imag-over-h", "imag-k", "k", "k-corr-2d"],
}


class SpecError(ValueError):
    """Invalid study specification."""


def _k_range(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError("expected a:b or a:b:step")
    try:
        a, b = float(parts[0]), float(parts[1])
        step = float(parts[2]) if len(parts) == 3 else 1.0
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if step <= 0 or b < a:
        raise argparse.ArgumentTypeError("need b >= a and step > 0")
    n = int(np.floor((b - a) / step + 1e-9)) + 1
    return [a + i * step for i in range(n)]


def _float_list(text: str) -> list[float]:
    try:
        out = [float(eval_fraction(s)) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def eval_fraction(s: str) -> float:
    """Parse ``0.01`` or ``1/100``."""
    s = s.strip()
    if "/" in s:
        num, den = s.split("/", 1)
        return float(num) / float(den)
    return float(s)


def _rule(text: str) -> PenaltyRule:
    try:
        return PenaltyRule.parse(text)
    except (ValueError, InvalidPenaltyError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hdg-helmholtz",
                                description="Linear HDG studies for the Helmholtz equation with impedance boundary.")
    sub = p.add_subparsers(dest="study", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dim", type=int, choices=(1, 2), default=1)
    common.add_argument("--k", type=float, action="append", help="wave number (repeatable)")
    common.add_argument("--k-range", type=_k_range, help="a:b[:step] list of wave numbers")
    common.add_argument("--h-list", type=_float_list, help="comma separated mesh sizes, e.g. 1/20,1/40")
    common.add_argument("--kh", type=float, default=1.0, help="fixed kh for pollution sweeps")
    common.add_argument("--tau", type=_rule, action="append",
                        help="penalty rule (repeatable): imag-over-h, imag-k, k, k-corr-1d, "
                             "tau-opt-1d, k-corr-2d or const:<re>,<im>")
    common.add_argument("--gh-degree", type=int, choices=(1, 2), default=None)
    common.add_argument("--eps", type=float, default=0.1, help="tolerance for critical-h")
    common.add_argument("--quantity", choices=("u", "q", "both"), default="both")
    common.add_argument("--out-csv", help="write records as CSV")
    common.add_argument("--out-svg", help="write a log-log plot as SVG")
    common.add_argument("--dump-mesh", help="write the finest 2D mesh in plain-text format")
    common.add_argument("--threads", type=int, default=1)
    for name, hlp in (("convergence", "errors versus 1/h at fixed k"),
                      ("pollution", "errors at fixed kh over a range of k"),
                      ("critical-h", "critical mesh size h(k, eps)"),
                      ("dispersion", "discrete wavenumbers and phase errors"),
                      ("postprocess", "errors of the postprocessed u* versus 1/h")):
        sub.add_parser(name, parents=[common], help=hlp)
    return p


def _ks(args) -> list[float]:
    ks = list(args.k or []) + list(args.k_range or [])
    if not ks:
        raise SpecError("give at least one wave number with --k or --k-range")
    if any(k <= 0 for k in ks):
        raise SpecError("wave numbers must be positive")
    return ks


def _hs(args) -> list[float]:
    if not args.h_list:
        raise SpecError("--h-list is required for this study")
    if any(h <= 0 for h in args.h_list):
        raise SpecError("mesh sizes must be positive")
    return args.h_list


def _print_records(records) -> None:
    for r in records:
        if r.status == "ok":
            extra = f" e_u*={r.e_ustar:.4e}" if r.e_ustar is not None else ""
            print(f"{r.rule:>14} k={r.k:<8g} h={r.h:<10.4g} e_u={r.e_u:.4e} e_q={r.e_q:.4e} "
                  f"e_uI={r.e_uI:.4e} e_qI={r.e_qI:.4e}{extra}")
        else:
            print(f"{r.rule:>14} k={r.k:<8g} h={r.h:<10.4g} FAILED: {r.reason}")


def _slopes(records) -> None:
    for rule in dict.fromkeys(r.rule for r in records):
        rs = [r for r in records if r.rule == rule]
        x = [1.0 / r.h for r in rs]
        msg = f"{rule:>14} slope e_u={-studies.fitted_slope(x, [r.e_u for r in rs]):.3f} " \
              f"e_q={-studies.fitted_slope(x, [r.e_q for r in rs]):.3f}"
        if any(r.e_ustar is not None for r in rs):
            msg += f" e_u*={-studies.fitted_slope(x, [r.e_ustar or np.nan for r in rs]):.3f}"
        print(msg)


def run(args) -> int:
    rules = args.tau or [PenaltyRule(t) for t in DEFAULT_RULES[args.dim]]
    if args.threads < 1:
        raise SpecError("--threads must be >= 1")
    if args.dump_mesh:
        if args.dim != 2:
            raise SpecError("--dump-mesh needs --dim 2")
        m = max(studies.n_for_h(2, h) for h in _hs(args)) if args.h_list else 4
        dump_mesh(studies.build_problem(2, 1.0, m)[0], args.dump_mesh)
    failed = False
    if args.study in ("convergence", "postprocess"):
        hs = _hs(args)
        records = []
        for k in _ks(args):
            if args.study == "convergence":
                records += studies.run_convergence_study(k, hs, rules, args.dim, args.gh_degree or 1,
                                                         args.threads)
            else:
                records += studies.run_postprocess_study(k, hs, rules, args.dim, args.gh_degree or 2,
                                                         args.threads)
        _print_records(records)
        _slopes(records)
        failed = any(r.status != "ok" for r in records)
        if args.out_csv:
            studies.emit_csv(records, args.out_csv)
        if args.out_svg:
            slopes = (-1, -2, -3) if args.study == "postprocess" else (-1, -2)
            studies.emit_svg(studies.sweep_series(records, "1/h", slopes), args.out_svg,
                             f"{args.study}, dim {args.dim}", "1/h", "relative L2 error")
    elif args.study == "pollution":
        records = studies.run_pollution_study(_ks(args), rules, args.kh, args.dim, args.gh_degree or 1,
                                              args.threads)
        _print_records(records)
        failed = any(r.status != "ok" for r in records)
        if args.out_csv:
            studies.emit_csv(records, args.out_csv)
        if args.out_svg:
            studies.emit_svg(studies.sweep_series(records, "k"), args.out_svg,
                             f"pollution, kh = {args.kh:g}, dim {args.dim}", "k", "relative L2 error")
    elif args.study == "critical-h":
        if not 0 < args.eps < 1:
            raise SpecError("--eps must lie in (0, 1)")
        qs = ("u", "q") if args.quantity == "both" else (args.quantity,)
        results = []
        series = []
        for rule in rules:
            for qty in qs:
                rs = []
                for k in _ks(args):
                    try:
                        r = studies.critical_mesh_size(k, args.eps, qty, rule, args.dim)
                    except (studies.BudgetError, *studies.CELL_ERRORS) as exc:
                        print(f"{rule.tag:>14} {qty} k={k:g} FAILED: {exc}")
                        failed = True
                        continue
                    rs.append(r)
                    print(f"{rule.tag:>14} {qty} k={k:<8g} h={r.h:.6g} n={r.n}")
                if len(rs) >= 2:
                    print(f"{rule.tag:>14} {qty} slope {studies.critical_h_slope(rs):.3f}")
                    series.append(studies.Series(f"{qty}_h {rule.tag}", [r.k for r in rs], [r.h for r in rs]))
                results += rs
        if args.out_csv:
            studies.emit_csv(results, args.out_csv, studies.CriticalMeshResult)
        if args.out_svg:
            studies.emit_svg(series, args.out_svg, f"critical mesh size, eps = {args.eps:g}", "k", "h(k, eps)")
    elif args.study == "dispersion":
        hs = _hs(args)
        records = []
        series = []
        for k in _ks(args):
            recs = studies.run_dispersion_study(k, hs, rules, args.dim)
            records += recs
            for rule in rules:
                rs = [r for r in recs if r.rule == rule.tag]
                print(f"{rule.tag:>14} k={k:g} slope {studies.fitted_slope([r.h for r in rs], [r.phase_error for r in rs]):.3f}")
                series.append(studies.Series(f"{rule.tag} k={k:g}", [1 / r.h for r in rs],
                                             [r.phase_error for r in rs]))
        if args.out_csv:
            studies.emit_csv(records, args.out_csv, studies.DispersionRecord)
        if args.out_svg:
            studies.emit_svg(series, args.out_svg, f"phase error, dim {args.dim}", "1/h", "|k_h - k|")
    return 2 if failed else 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return run(args)
    except (SpecError, OSError, MeshError, InvalidPenaltyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
