"""Compare the compiled 1D kernel with the numpy implementation.

Usage: python benchmarks/bench_kernels.py [--sizes 1000,10000,100000] [--repeat 5]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from hdg_helmholtz import kernels
from hdg_helmholtz.exact import plane_wave_1d
from hdg_helmholtz.hdg import boundary_load, element_load, facet_tau
from hdg_helmholtz.mesh import build_uniform_1d
from hdg_helmholtz.penalty import PenaltyRule


def setup(n: int, k: float, rule: PenaltyRule):
    mesh = build_uniform_1d(0.0, 1.0, n)
    ex = plane_wave_1d(k)
    F = element_load(mesh, ex.f, k)
    gb = boundary_load(mesh, ex.g, k)[:, 0]
    return (mesh.nodes, k, facet_tau(mesh, k, rule), F[:, 0], F[:, 1], gb[0], gb[-1])


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", default="1000,10000,100000")
    p.add_argument("--k", type=float, default=100.0)
    p.add_argument("--tau", default="k-corr-1d")
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    rule = PenaltyRule.parse(args.tau)
    have = kernels._compiled_solve_1d is not None
    print(f"compiled kernel available: {have}")
    print(f"{'n':>8} {'numpy [ms]':>12} {'compiled [ms]':>14} {'speedup':>8} {'max |diff|':>11}")
    for n in (int(s) for s in args.sizes.split(",")):
        data = setup(n, args.k, rule)
        t_np = min(timeit.repeat(lambda: kernels.solve_1d(*data, backend="numpy"),
                                 number=1, repeat=args.repeat))
        ref = kernels.solve_1d(*data, backend="numpy")[1]
        if have:
            t_c = min(timeit.repeat(lambda: kernels.solve_1d(*data, backend="compiled"),
                                    number=1, repeat=args.repeat))
            diff = np.abs(kernels.solve_1d(*data, backend="compiled")[1] - ref).max()
            print(f"{n:>8} {1e3 * t_np:>12.3f} {1e3 * t_c:>14.3f} {t_np / t_c:>8.1f} {diff:>11.2e}")
        else:
            print(f"{n:>8} {1e3 * t_np:>12.3f} {'-':>14} {'-':>8} {'-':>11}")


if __name__ == "__main__":
    main()
