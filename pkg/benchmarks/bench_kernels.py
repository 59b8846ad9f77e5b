#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Runs the three hot operations (all-pair correlation, average pooling, and
pyramid lookup) at several desk-scale sizes and prints a timing table with
the native/numpy speedup.  Use FLOWSEEK_PURE_PYTHON=1 to confirm the
fallback path end to end.
"""

import argparse
import time

import numpy as np

from flowseek._kernels import _numpy_backend

try:
    from flowseek._kernels import _native
except ImportError:
    _native = None


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(repeat):
    rng = np.random.default_rng(7)
    rows = []
    for side in (16, 32, 48, 64):
        f0 = rng.standard_normal((side, side, 8))
        f1 = rng.standard_normal((side, side, 8))
        flow_u = rng.uniform(-2, 2, (side, side))
        flow_v = rng.uniform(-2, 2, (side, side))
        volume = _numpy_backend.correlate_all_pairs(f0, f1)

        cases = [
            (f"correlate  {side}x{side} K=8", lambda b: b.correlate_all_pairs(f0, f1)),
            (f"avg_pool   {side}x{side} s=2", lambda b: b.avg_pool(f0, 2)),
            (f"lookup r=4 {side}x{side}", lambda b: b.lookup_level(volume, flow_u, flow_v, 1.0, 4)),
        ]
        for name, call in cases:
            t_np = _time(lambda: call(_numpy_backend), repeat)
            if _native is not None:
                t_nat = _time(lambda: call(_native), repeat)
                rows.append((name, t_np, t_nat, t_np / t_nat))
            else:
                rows.append((name, t_np, None, None))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5, help="best-of-N timing")
    args = parser.parse_args()

    rows = bench(args.repeat)
    header = f"{'operation':28s} {'numpy [ms]':>12s} {'native [ms]':>12s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for name, t_np, t_nat, speedup in rows:
        if t_nat is None:
            print(f"{name:28s} {1e3 * t_np:12.3f} {'n/a':>12s} {'n/a':>8s}")
        else:
            print(f"{name:28s} {1e3 * t_np:12.3f} {1e3 * t_nat:12.3f} {speedup:8.2f}")
    if _native is None:
        print("\nnative extension not built; only the numpy backend was timed")


if __name__ == "__main__":
    main()
