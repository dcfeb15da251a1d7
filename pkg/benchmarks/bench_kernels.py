#!/usr/bin/env python3
"""Benchmark the jitted kernels against their pure-Python originals.

Usage: python benchmarks/bench_kernels.py [--repeats N]

The package selects between the two paths with FALSIFY_KIT_NO_NUMBA; this
script times both directly regardless of the flag.
"""

import argparse
import time

import numpy as np

from falsify_kit import kernels

CARTPOLE_ARGS = (0.3, 0.0, -0.08, 0.0, 0.45, 0.9, 1.0, 9.8,
                 -3.162, -5.915, -49.507, -12.844, 2.5, 0.02, 500, 1e6)
LANECHANGE_ARGS = (22.0, 12.0, 3.0, 1.7, 60.0, 0.05, 1200)
HALTON_ARGS = (1, 2000, np.array([2, 3, 5, 7], dtype=np.int64))

CASES = [
    ("cartpole_core (500 steps)", kernels.cartpole_core,
     kernels.cartpole_core_py, CARTPOLE_ARGS),
    ("lanechange_core (1200 steps)", kernels.lanechange_core,
     kernels.lanechange_core_py, LANECHANGE_ARGS),
    ("halton_block (2000x4)", kernels.halton_block,
     kernels.halton_block_py, HALTON_ARGS),
]


def best_of(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    if not kernels.NUMBA_ENABLED:
        print("note: FALSIFY_KIT_NO_NUMBA is set; 'jit' column is the "
              "pure path too\n")
    print(f"{'kernel':<30} {'jit (ms)':>10} {'pure (ms)':>11} {'speedup':>9}")
    for name, jit_fn, py_fn, fn_args in CASES:
        jit_fn(*fn_args)  # compile outside the timed region
        t_jit = best_of(jit_fn, fn_args, args.repeats)
        t_py = best_of(py_fn, fn_args, args.repeats)
        print(f"{name:<30} {t_jit * 1e3:>10.3f} {t_py * 1e3:>11.3f} "
              f"{t_py / t_jit:>8.1f}x")


if __name__ == "__main__":
    main()
