#!/usr/bin/env python3
"""Benchmark the numba fast path against the pure-numpy fallback.

Run from the repository root:

    python benchmarks/bench_kernels.py

Covers the two hot kernels: the assignment solver behind the exact
2-Wasserstein distance and the batched divergence rows. The numba path
must be available (do not set REPGAP_NO_NUMBA when running this).
"""

import time

import numpy as np

from repgap import kernels


def median_time(func, *args, repeats=5):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        func(*args)
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def check_close(a, b, tol=1e-9):
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))) <= tol


def bench_assignment():
    print("assignment solver (squared-distance costs)")
    print(f"{'n':>6} {'numpy[s]':>10} {'numba[s]':>10} {'speedup':>8}")
    rng = np.random.default_rng(0)
    for n in (64, 128, 256, 512):
        cost = rng.uniform(0.0, 4.0, size=(n, n))
        kernels.solve_assignment_numba(cost)  # warm the jit
        t_np = median_time(kernels.solve_assignment_numpy, cost)
        t_nb = median_time(kernels.solve_assignment_numba, cost)
        _, total_np = kernels.solve_assignment_numpy(cost)
        _, total_nb = kernels.solve_assignment_numba(cost)
        assert abs(total_np - total_nb) <= 1e-9, "backends disagree"
        print(f"{n:>6} {t_np:>10.4f} {t_nb:>10.4f} {t_np / t_nb:>7.1f}x")


def bench_divergences():
    print("\nbatched divergence rows (10000 x d)")
    print(f"{'d':>6} {'numpy[s]':>10} {'numba[s]':>10} {'speedup':>8}")
    rng = np.random.default_rng(1)
    for d in (64, 256, 1024):
        p = rng.dirichlet(np.ones(d), size=10_000)
        q = rng.dirichlet(np.ones(d), size=10_000)
        kernels.js_rows_numba(p[:2], q[:2])
        kernels.kl_rows_numba(p[:2], q[:2])

        def both_numpy(p=p, q=q):
            kernels.kl_rows_numpy(p, q)
            kernels.js_rows_numpy(p, q)

        def both_numba(p=p, q=q):
            kernels.kl_rows_numba(p, q)
            kernels.js_rows_numba(p, q)

        assert check_close(kernels.js_rows_numba(p, q), kernels.js_rows_numpy(p, q), 1e-10)
        t_np = median_time(both_numpy)
        t_nb = median_time(both_numba)
        print(f"{d:>6} {t_np:>10.4f} {t_nb:>10.4f} {t_np / t_nb:>7.1f}x")


def main():
    if kernels.solve_assignment_numba is None:
        raise SystemExit("numba path unavailable (REPGAP_NO_NUMBA set or numba missing)")
    print(f"selected backend at import: {kernels.BACKEND}\n")
    bench_assignment()
    bench_divergences()


if __name__ == "__main__":
    main()
