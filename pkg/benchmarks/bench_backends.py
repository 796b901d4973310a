"""Benchmark the numba kernels against their pure-numpy fallbacks.

Run with the default environment to time both paths side by side (the
numba kernels are compiled even when the fallback is benchmarked, so a
first warm-up call is excluded from the timings):

    python benchmarks/bench_backends.py

Set FDPSGD_DISABLE_NUMBA=1 to check that the package works without
compilation; in that mode only the numpy column is meaningful.
"""

import time

import numpy as np

from fdpsgd._backend import NUMBA_ENABLED
from fdpsgd.mixture import MixtureSpec, _mixture_batch_nb, _mixture_batch_np
from fdpsgd.oracle import (
    _c2_counts_nb,
    _c2_counts_np,
    _c2_multiset_nb,
    _c2_multiset_np,
    _chunk_rng,
    _inf_scan2_gauss,
)
from fdpsgd.curves import default_alphas
from fdpsgd._normal import gauss_beta_vec


def timeit(fn, repeats=3):
    fn()  # warm-up / compile
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_mixture():
    spec = MixtureSpec([(0.5, 0.2), (1.0, 0.5), (2.0, 0.3)], 1.0)
    mus, qs = spec.positive_parts()
    alphas = default_alphas(4097)
    t_nb = timeit(lambda: _mixture_batch_nb(alphas, mus, qs, 0.0))
    t_np = timeit(lambda: _mixture_batch_np(alphas, mus, qs, 0.0))
    check = np.max(
        np.abs(
            np.asarray(_mixture_batch_nb(alphas, mus, qs, 0.0))
            - _mixture_batch_np(alphas, mus, qs, 0.0)
        )
    )
    return "mixture curve (4097 alphas, 3 comps)", t_nb, t_np, check


def bench_mc_subsample():
    rng = _chunk_rng(7, 0)
    u = rng.random((4096, 10, 24))
    t_nb = timeit(lambda: _c2_counts_nb(u, 4, 2, 3, 2, True))
    t_np = timeit(lambda: _c2_counts_np(u, 4, 2, 3, 2, True))
    check = float(
        np.max(np.abs(_c2_counts_nb(u, 4, 2, 3, 2, True) - _c2_counts_np(u, 4, 2, 3, 2, True)))
    )
    return "mc subsampling counts (4096 trials)", t_nb, t_np, check


def bench_mc_multiset():
    rng = _chunk_rng(7, 1)
    u_bins = rng.random((4096, 4, 7))
    u_slots = rng.random((4096, 4, 4, 8))
    args = (u_bins, u_slots, 4, 2, 4, 4)
    t_nb = timeit(lambda: _c2_multiset_nb(*args))
    t_np = timeit(lambda: _c2_multiset_np(*args))
    check = float(np.max(np.abs(_c2_multiset_nb(*args) - _c2_multiset_np(*args))))
    return "mc shuffling occupancy (4096 trials)", t_nb, t_np, check


def bench_infimum():
    alphas = np.linspace(0.05, 0.95, 99)

    def run_nb():
        for a in alphas:
            _inf_scan2_gauss(1.0, 2.0, 0.5, 0.5, float(a), 1e-4)

    def run_np():
        grid = np.arange(0.0, 1.0 + 5e-5, 1e-4)
        for a in alphas:
            a2 = (a - 0.5 * grid) / 0.5
            mask = (a2 >= 0.0) & (a2 <= 1.0)
            np.min(0.5 * gauss_beta_vec(1.0, grid[mask]) + 0.5 * gauss_beta_vec(2.0, a2[mask]))

    t_nb = timeit(run_nb)
    t_np = timeit(run_np)
    return "infimum scan (99 alphas, step 1e-4)", t_nb, t_np, 0.0


def main():
    print(f"numba backend enabled: {NUMBA_ENABLED}")
    rows = [bench_mixture(), bench_mc_subsample(), bench_mc_multiset(), bench_infimum()]
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}  max|diff|")
    for name, t_nb, t_np, check in rows:
        print(
            f"{name:<{width}}  {t_nb * 1e3:>8.2f}ms  {t_np * 1e3:>8.2f}ms  "
            f"{t_np / t_nb:>7.1f}x  {check:.3g}"
        )


if __name__ == "__main__":
    main()
