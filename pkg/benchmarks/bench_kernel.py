#!/usr/bin/env python3
"""Benchmark the compiled core against the pure-Python fallback.

Usage: python benchmarks/bench_kernel.py [--quick]
"""

from __future__ import annotations

import argparse
import time

from amosim import _pyexplore, _pyrun, core


def time_run(impl, n, m, beta, seed=0, scheduler=1, repeat=3):
    best = None
    steps = 0
    for _ in range(repeat):
        t0 = time.perf_counter()
        payload = impl(
            n=n, m=m, beta=beta, f=0, flagged=False, writeall=False,
            leftover_free=False, scheduler=scheduler, seed=seed,
            crash_times=None, starvation_factor=64,
            max_steps=64 * n * m * m, initial_stopped=(), base_jobs=None, wa=None,
        )
        dt = time.perf_counter() - t0
        steps = payload["steps"]
        best = dt if best is None else min(best, dt)
    return steps, best


def time_explore(impl, n, m, beta, f, repeat=2):
    best = None
    states = 0
    for _ in range(repeat):
        t0 = time.perf_counter()
        rep = impl(n=n, m=m, beta=beta, f=f, depth_limit=10**7, prune_crashes=True)
        dt = time.perf_counter() - t0
        states = rep["states_visited"]
        best = dt if best is None else min(best, dt)
    return states, best


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    args = parser.parse_args()

    if not core.compiled_available():
        print("compiled core not built; nothing to compare")
        return
    from amosim import _core

    run_cases = [(1024, 4, 48), (4096, 8, 192)] if args.quick else \
                [(1024, 4, 48), (4096, 8, 192), (16384, 8, 192)]
    print(f"{'run workload':>24} {'steps':>9} {'pure s':>9} {'compiled s':>11} {'speedup':>8}")
    for (n, m, beta) in run_cases:
        steps, tc = time_run(_core.run_core, n, m, beta)
        _, tp = time_run(_pyrun.run_core, n, m, beta, repeat=1)
        print(f"{f'n={n} m={m} beta={beta}':>24} {steps:>9} {tp:>9.3f} {tc:>11.4f} "
              f"{tp / tc:>7.1f}x")

    explore_cases = [(4, 2, 2, 1), (5, 2, 2, 1)] if args.quick else \
                    [(4, 2, 2, 1), (5, 2, 2, 1), (5, 3, 3, 2)]
    print(f"\n{'explore workload':>24} {'states':>9} {'pure s':>9} {'compiled s':>11} {'speedup':>8}")
    for (n, m, beta, f) in explore_cases:
        states, tc = time_explore(_core.explore_core, n, m, beta, f)
        _, tp = time_explore(_pyexplore.explore_core, n, m, beta, f, repeat=1)
        print(f"{f'({n},{m},{beta},{f})':>24} {states:>9} {tp:>9.3f} {tc:>11.4f} "
              f"{tp / tc:>7.1f}x")


if __name__ == "__main__":
    main()
