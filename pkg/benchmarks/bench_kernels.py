#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Times the three hot paths at cohort-like sizes and prints one table row per
(kernel, size).  The numba columns include a warm-up call so JIT compilation
is not billed to the measurement.

    python benchmarks/bench_kernels.py [--repeats 5]

Selecting a backend for the package itself is separate: set
``VIDCLICK_BACKEND=numpy`` (or ``numba``) before import.
"""

import argparse
import time

import numpy as np

from vidclick import _accel


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_fuzzy(repeats):
    rng = np.random.Generator(np.random.Philox(1))
    patterns = rng.integers(0, 8, size=(38, 4)).astype(np.int64)
    rows = []
    for n_seq, seq_len in ((200, 60), (1000, 120), (4000, 200)):
        seqs = [rng.integers(0, 8, size=seq_len).astype(np.int64) for _ in range(n_seq)]
        _accel.fuzzy_weights_nb(patterns, seqs[0], 0.1, 1.0, 1.0)  # warm-up

        def run(fn):
            for s in seqs:
                fn(patterns, s, 0.1, 1.0, 1.0)

        t_nb = timeit(lambda: run(_accel.fuzzy_weights_nb), repeats)
        t_np = timeit(lambda: run(_accel.fuzzy_weights_np), repeats)
        rows.append(("fuzzy_weights", f"{n_seq}x{seq_len}", t_nb, t_np))
    return rows


def bench_transitions(repeats):
    rng = np.random.Generator(np.random.Philox(2))
    rows = []
    for n_tokens in (10_000, 100_000, 1_000_000):
        seq = rng.integers(0, 8, size=n_tokens).astype(np.int64)
        _accel.transition_counts_nb(seq, 1, 8)  # warm-up
        t_nb = timeit(lambda: _accel.transition_counts_nb(seq, 1, 8), repeats)
        t_np = timeit(lambda: _accel.transition_counts_np(seq, 1, 8), repeats)
        rows.append(("transition_counts", f"{n_tokens}", t_nb, t_np))
    return rows


def bench_assign(repeats):
    rng = np.random.Generator(np.random.Philox(3))
    rows = []
    for n, k in ((2000, 8), (20000, 8), (20000, 32)):
        X = rng.normal(size=(n, 64))
        C = rng.normal(size=(k, 64))
        _accel.nearest_centroids_nb(X, C)  # warm-up
        t_nb = timeit(lambda: _accel.nearest_centroids_nb(X, C), repeats)
        t_np = timeit(lambda: _accel.nearest_centroids_np(X, C), repeats)
        rows.append(("nearest_centroids", f"{n}x64,k={k}", t_nb, t_np))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if not _accel.HAS_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    print(f"{'kernel':<20} {'size':<16} {'numba (s)':>12} {'numpy (s)':>12} {'speedup':>9}")
    for rows in (bench_fuzzy(args.repeats), bench_transitions(args.repeats), bench_assign(args.repeats)):
        for kernel, size, t_nb, t_np in rows:
            print(f"{kernel:<20} {size:<16} {t_nb:>12.5f} {t_np:>12.5f} {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
