"""Benchmark the compiled kernel backend against the pure-numpy fallback.

Usage:
    python3 benchmarks/bench_kernels.py [--n-series 120] [--repeats 3]

Both backends must produce bitwise-identical answers; the benchmark asserts
that before reporting timings, so a speedup never hides a divergence.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from datmine import kernels


def best_of(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def make_series(rng: np.random.Generator, n: int) -> list[np.ndarray]:
    return [rng.random((int(rng.integers(10, 60)), 2)) for _ in range(n)]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-series", type=int, default=120,
                        help="trajectories for the pairwise DTW benchmark")
    parser.add_argument("--jacobi-n", type=int, default=120,
                        help="matrix size for the eigensolver benchmark")
    parser.add_argument("--repeats", type=int, default=3,
                        help="take the best of this many runs")
    args = parser.parse_args()

    pure = kernels.get_backend("pure")
    try:
        compiled = kernels.get_backend("compiled")
    except ImportError:
        print("compiled backend not available; nothing to compare")
        return
    print(f"active dispatch: {kernels.BACKEND}")

    rng = np.random.default_rng(0)
    series = make_series(rng, args.n_series)
    sym = rng.normal(size=(args.jacobi_n, args.jacobi_n))
    sym = (sym + sym.T) * 0.5

    d_pure = pure.pairwise_dtw(series)
    d_comp = compiled.pairwise_dtw(series)
    assert np.array_equal(d_pure, d_comp), "backends disagree on DTW"
    vals_pure, vecs_pure = pure.jacobi_eigh(sym.copy())
    vals_comp, vecs_comp = compiled.jacobi_eigh(sym.copy())
    assert np.array_equal(vals_pure, vals_comp), "backends disagree on eigenvalues"
    assert np.array_equal(vecs_pure, vecs_comp), "backends disagree on eigenvectors"

    n_pairs = args.n_series * (args.n_series - 1) // 2
    rows = [
        (f"pairwise_dtw ({args.n_series} series, {n_pairs} pairs)",
         best_of(lambda: pure.pairwise_dtw(series), args.repeats),
         best_of(lambda: compiled.pairwise_dtw(series), args.repeats)),
        (f"jacobi_eigh ({args.jacobi_n}x{args.jacobi_n})",
         best_of(lambda: pure.jacobi_eigh(sym.copy()), args.repeats),
         best_of(lambda: compiled.jacobi_eigh(sym.copy()), args.repeats)),
    ]

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'pure':>10}  {'compiled':>10}  {'speedup':>8}")
    for name, t_pure, t_comp in rows:
        print(f"{name:<{width}}  {t_pure:>9.3f}s  {t_comp:>9.3f}s  "
              f"{t_pure / t_comp:>7.1f}x")


if __name__ == "__main__":
    main()
