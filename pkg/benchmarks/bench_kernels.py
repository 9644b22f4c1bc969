#!/usr/bin/env python3
"""Benchmark the compiled core against the numpy fallback.

Times the three grid kernels and the fused CG at a few grid sizes, plus a
whole model step, and prints the speedups.  Run:

    python benchmarks/bench_kernels.py [--sizes 32,64,128] [--repeats 200]
"""

import argparse
import math
import time

import numpy as np

from haptosim import _kernels
from haptosim.domain import DomainSpec, Grid
from haptosim.linsolve import _operator_diagonal


def best_of(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(n, repeats):
    rng = np.random.default_rng(0)
    x = np.ascontiguousarray(rng.standard_normal((n, n)))
    u = np.ascontiguousarray(rng.uniform(0.0, 2.0, (n, n)))
    out = np.empty_like(x)
    h = 1.0 / n
    rows = []
    for name, call in [
        ("shifted_laplacian", lambda be: be.shifted_laplacian(x, 1.0, 1e-3, h, h, out)),
        ("upwind_divergence", lambda be: be.upwind_divergence(u, x, h, h, out)),
        ("max_face_speeds", lambda be: be.max_face_speeds(x, h, h)),
    ]:
        times = {}
        for backend in _kernels.available_backends():
            be = _kernels.get_backend(backend)
            times[backend] = best_of(lambda: call(be), repeats)
        rows.append((name, times))
    return rows


def bench_cg(n, repeats):
    g = Grid(n, n, DomainSpec(1.0, 1.0))
    rng = np.random.default_rng(1)
    rhs = np.ascontiguousarray(rng.standard_normal((n, n)))
    a, b = 1.0 + 1e-3, 1e-3
    diag = _operator_diagonal(g, a, b)
    times = {}
    if "cython" in _kernels.available_backends():
        core = _kernels.get_backend("cython")

        def run_c():
            x = np.zeros((n, n))
            core.pcg_solve(x, rhs, a, b, g.hx, g.hy, diag, 1e-10, 20 * n)

        times["cython"] = best_of(run_c, max(3, repeats // 20))

    from haptosim import linsolve

    saved = linsolve._kernels.pcg_solve

    def run_p():
        linsolve._pcg(g, a, b, rhs, 1e-10, 20 * n, None)

    try:
        linsolve._kernels.pcg_solve = None
        times["numpy"] = best_of(run_p, max(3, repeats // 20))
    finally:
        linsolve._kernels.pcg_solve = saved
    return times


def bench_step(n, repeats):
    from haptosim import initdata, model

    g = Grid(n, n, DomainSpec(1.0, 1.0))
    u0 = initdata.bump(g, (0.5, 0.5), 0.35, 2 * math.pi)
    params = model.Params(chi=1.0, xi=0.5, eta=0.01, tau=1)
    control = model.StepControl(dt_max=1e-3, dt_min=1e-12)
    state = model.initial_state(u0, g.full(0.5), params, v0=g.zeros())
    state, _ = model.step(state, params, control)

    def one():
        model.step(state, params, control)

    return best_of(one, max(3, repeats // 10))


def fmt(seconds):
    return f"{seconds * 1e6:9.1f} us"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="32,64,128")
    ap.add_argument("--repeats", type=int, default=200)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    print(f"available backends: {', '.join(_kernels.available_backends())}")
    print(f"active backend: {_kernels.backend_name()}\n")

    for n in sizes:
        print(f"== {n} x {n} ==")
        for name, times in bench_kernels(n, args.repeats):
            line = f"  {name:<20}"
            for backend in ("numpy", "cython"):
                if backend in times:
                    line += f" {backend}: {fmt(times[backend])}"
            if "cython" in times and times["cython"] > 0:
                line += f"  speedup: {times['numpy'] / times['cython']:5.1f}x"
            print(line)
        cg = bench_cg(n, args.repeats)
        line = f"  {'pcg_solve (cold)':<20}"
        for backend in ("numpy", "cython"):
            if backend in cg:
                line += f" {backend}: {fmt(cg[backend])}"
        if "cython" in cg:
            line += f"  speedup: {cg['numpy'] / cg['cython']:5.1f}x"
        print(line)
        print(f"  {'full model step':<20} active: {fmt(bench_step(n, args.repeats))}")
        print()


if __name__ == "__main__":
    main()
