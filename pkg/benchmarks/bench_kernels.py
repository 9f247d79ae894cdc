"""Benchmark the numpy and numba kernel variants.

Usage: python3 benchmarks/bench_kernels.py [--sizes 1e4,1e6,1e7] [--repeats 20]

Times the two hot elementwise kernels (stochastic round + clip, Laplace
inverse-CDF transform) on both backends with identical inputs, after a jit
warmup pass, and prints per-call times and speedups.
"""

from __future__ import annotations

import argparse
from time import perf_counter

import numpy as np

from fedqdp import _kernels


def time_call(fn, *args, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = perf_counter()
        fn(*args)
        best = min(best, perf_counter() - start)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="1e4,1e6,1e7",
                        help="comma-separated element counts")
    parser.add_argument("--repeats", type=int, default=20,
                        help="timing repetitions, best-of is reported")
    args = parser.parse_args()
    sizes = [int(float(s)) for s in args.sizes.split(",")]

    if _kernels.round_clip_numba is None:
        print("numba is not importable; only the numpy path can be timed")
        return 1

    rng = np.random.default_rng(0)
    print(f"{'kernel':<14} {'n':>10} {'numpy':>12} {'numba':>12} {'speedup':>8}")
    for n in sizes:
        scaled = rng.uniform(-130, 130, size=n)
        u = rng.random(n)
        ref = _kernels.round_clip_numpy(scaled, u, 127)
        jit = _kernels.round_clip_numba(scaled, u, 127)  # warmup + check
        assert np.array_equal(ref, jit), "backends disagree on codes"
        t_np = time_call(_kernels.round_clip_numpy, scaled, u, 127, repeats=args.repeats)
        t_nb = time_call(_kernels.round_clip_numba, scaled, u, 127, repeats=args.repeats)
        print(f"{'round_clip':<14} {n:>10} {t_np * 1e3:>10.3f}ms {t_nb * 1e3:>10.3f}ms {t_np / t_nb:>7.2f}x")

        centered = u - 0.5
        ref = _kernels.laplace_from_uniform_numpy(centered, 1.3)
        jit = _kernels.laplace_from_uniform_numba(centered, 1.3)
        assert np.allclose(ref, jit, rtol=1e-14), "backends disagree beyond ulp"
        t_np = time_call(_kernels.laplace_from_uniform_numpy, centered, 1.3, repeats=args.repeats)
        t_nb = time_call(_kernels.laplace_from_uniform_numba, centered, 1.3, repeats=args.repeats)
        print(f"{'laplace':<14} {n:>10} {t_np * 1e3:>10.3f}ms {t_nb * 1e3:>10.3f}ms {t_np / t_nb:>7.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
