"""Independent Monte Carlo and brute-force verification oracles.

Everything here re-derives quantities the analytic modules compute, by
simulation or exhaustive search, so the two routes can be compared in
tests: empirical sampling distributions of c^2, empirical trade-off
curves from threshold tests on shifted Gaussians, and the constrained
infimum that defines the exact mixture curve.

Randomness uses the Philox counter-based generator with per-chunk
substreams keyed by (seed, chunk index): results are reproducible for a
fixed seed and independent of how chunks are scheduled across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._backend import NUMBA_ENABLED, maybe_njit
from ._normal import gauss_beta, gauss_beta_vec, phi_inv_vec
from .curves import TradeoffCurve
from .sampling import CVecDist, SamplerConfig

__all__ = [
    "EmpiricalCDist",
    "empirical_qdist",
    "empirical_tradeoff",
    "infimum_oracle",
    "CHUNK_TRIALS",
]

CHUNK_TRIALS = 4096


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    key = np.array([np.uint64(seed), np.uint64(chunk)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class EmpiricalCDist:
    """Histogram estimate of the c^2 distribution with binomial errors."""

    probs: dict
    stderr: dict
    trials: int
    seed: int

    def tv_distance(self, exact: CVecDist) -> float:
        keys = set(self.probs) | set(exact.as_dict())
        exact_map = exact.as_dict()
        return 0.5 * sum(
            abs(self.probs.get(k, 0.0) - exact_map.get(k, 0.0)) for k in keys
        )


@maybe_njit
def _c2_counts_nb(u, rounds, m, s, g, ms_only):
    """c^2 per trial; u is (trials, draws, N) uniforms, one draw per epoch
    (shuffling) or per round (subsampling, ms_only=True)."""
    n = u.shape[0]
    out = np.zeros(n, dtype=np.int64)
    for t in range(n):
        total = 0
        for d in range(u.shape[1]):
            order = np.argsort(u[t, d])
            if ms_only:
                level = 0
                for h in range(m):
                    touched = False
                    for j in range(s):
                        if order[h * s + j] < g:
                            touched = True
                    if touched:
                        level += 1
                total += level * level
            else:
                for b in range(rounds):
                    level = 0
                    for h in range(m):
                        touched = False
                        for j in range(s):
                            if order[(b * m + h) * s + j] < g:
                                touched = True
                        if touched:
                            level += 1
                    total += level * level
        out[t] = total
    return out


def _c2_counts_np(u, rounds, m, s, g, ms_only):
    order = np.argsort(u, axis=-1)
    if ms_only:
        sel = order[:, :, : m * s].reshape(u.shape[0], u.shape[1], m, s)
    else:
        sel = order.reshape(u.shape[0], u.shape[1], rounds, m, s)
    levels = (sel < g).any(axis=-1).sum(axis=-1)
    return np.sum(levels * levels, axis=tuple(range(1, levels.ndim))).astype(np.int64)


@maybe_njit
def _c2_multiset_nb(u_bins, u_slots, M, m, s, g):
    """c^2 per trial under the uniform-multiset occupancy model.

    u_bins: (trials, E, M-1+g) uniforms whose g smallest positions decode
    a uniform multiset of g balls over M rounds (stars and bars);
    u_slots: (trials, E, M, m*s) uniforms placing a round's balls into
    slots, which determines how many of its m subsets are touched.
    """
    n = u_bins.shape[0]
    E = u_bins.shape[1]
    out = np.zeros(n, dtype=np.int64)
    for t in range(n):
        total = 0
        for e in range(E):
            order = np.argsort(u_bins[t, e])
            picks = np.sort(order[:g])
            counts = np.zeros(M, dtype=np.int64)
            for i in range(g):
                counts[picks[i] - i] += 1
            for b in range(M):
                tb = counts[b]
                if tb == 0:
                    continue
                if m == 1:
                    total += 1
                    continue
                slot_order = np.argsort(u_slots[t, e, b])
                touched = np.zeros(m, dtype=np.int64)
                for i in range(tb):
                    touched[slot_order[i] // s] = 1
                level = int(np.sum(touched))
                total += level * level
        out[t] = total
    return out


def _c2_multiset_np(u_bins, u_slots, M, m, s, g):
    n, E, _ = u_bins.shape
    order = np.argsort(u_bins, axis=-1)
    picks = np.sort(order[:, :, :g], axis=-1)
    bins = picks - np.arange(g)[None, None, :]
    counts = np.zeros((n, E, M), dtype=np.int64)
    for i in range(g):
        np.add.at(counts, (np.arange(n)[:, None], np.arange(E)[None, :], bins[:, :, i]), 1)
    if m == 1:
        levels2 = (counts > 0).astype(np.int64)
    else:
        slot_order = np.argsort(u_slots, axis=-1)
        subset_of_rank = slot_order // s  # (n, E, M, m*s)
        levels2 = np.zeros((n, E, M), dtype=np.int64)
        for b in range(M):
            tb = counts[:, :, b]
            touched = np.zeros((n, E, m), dtype=bool)
            for r in range(int(tb.max()) if tb.size else 0):
                active = tb > r
                sub = subset_of_rank[:, :, b, r]
                touched[
                    np.arange(n)[:, None] * np.ones((1, E), dtype=int),
                    np.arange(E)[None, :] * np.ones((n, 1), dtype=int),
                    sub,
                ] |= active
            lev = touched.sum(axis=-1)
            levels2[:, :, b] = lev * lev
    return levels2.sum(axis=(1, 2)).astype(np.int64)


def _simulate_chunk(
    config: SamplerConfig, n: int, seed: int, chunk: int, sh_occupancy: str
):
    rng = _chunk_rng(seed, chunk)
    R = config.rounds_per_epoch
    if config.strategy == "SH" and sh_occupancy == "multiset":
        u_bins = rng.random((n, config.E, R - 1 + config.g))
        u_slots = rng.random((n, config.E, R, config.m * config.s))
        args = (u_bins, u_slots, R, config.m, config.s, config.g)
        if NUMBA_ENABLED:
            return _c2_multiset_nb(*args)
        return _c2_multiset_np(*args)
    if config.strategy == "SH":
        u = rng.random((n, config.E, config.N))
        args = (u, R, config.m, config.s, config.g, False)
    else:
        u = rng.random((n, config.E * R, config.N))
        args = (u, R, config.m, config.s, config.g, True)
    if NUMBA_ENABLED:
        return _c2_counts_nb(*args)
    return _c2_counts_np(*args)


def empirical_qdist(
    config: SamplerConfig,
    trials: int,
    seed: int = 20240,
    workers: int = 1,
    sh_occupancy: str = "multiset",
) -> EmpiricalCDist:
    """Simulate the sampler and histogram the realized c^2 values.

    Marked samples occupy indices {0, ..., g-1}; each trial draws E
    epochs of index sets, counts the touched-subset level of every round
    and accumulates c^2 = sum of squared levels.

    For shuffling, the closed-form per-epoch occupancy law counts the
    C(N/(ms)-1+g, g) ball-in-bin placements of the marked samples as
    equally likely; ``sh_occupancy="multiset"`` (default) samples exactly
    that model so simulation and formula are two routes to the same
    distribution.  ``sh_occupancy="permutation"`` instead shuffles a real
    permutation, whose occupancy law weights placements by slot
    multiplicity and is strictly more concentrated at full separation
    (for N=16, s=4, g=2 it gives {1: 0.2, 2: 0.8} against the model's
    {1: 0.4, 2: 0.6}).  Subsampling is always simulated faithfully.
    """
    if trials < 1000:
        raise ValueError("use at least 1000 trials")
    if sh_occupancy not in ("multiset", "permutation"):
        raise ValueError("sh_occupancy must be 'multiset' or 'permutation'")
    if (
        config.strategy == "SH"
        and sh_occupancy == "multiset"
        and config.g > config.s
    ):
        raise ValueError("multiset occupancy model requires g <= s")
    chunks = []
    done = 0
    idx = 0
    while done < trials:
        n = min(CHUNK_TRIALS, trials - done)
        chunks.append((idx, n))
        done += n
        idx += 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    lambda c: _simulate_chunk(config, c[1], seed, c[0], sh_occupancy),
                    chunks,
                )
            )
    else:
        results = [_simulate_chunk(config, n, seed, i, sh_occupancy) for i, n in chunks]
    c2 = np.concatenate(results)
    counts = np.bincount(c2)
    probs = {}
    stderr = {}
    for value, count in enumerate(counts):
        if count:
            p = count / trials
            probs[int(value)] = float(p)
            stderr[int(value)] = float(math.sqrt(p * (1.0 - p) / trials))
    return EmpiricalCDist(probs=probs, stderr=stderr, trials=trials, seed=seed)


@dataclass(frozen=True)
class EmpiricalTradeoff:
    alphas: np.ndarray
    betas: np.ndarray
    stderr: np.ndarray
    mu: float
    samples: int
    seed: int


def empirical_tradeoff(
    mu_true: float,
    sigma: float,
    samples: int,
    alphas,
    seed: int = 20240,
) -> EmpiricalTradeoff:
    """Estimate the trade-off curve of N(0, sigma^2) vs N(mu*sigma, sigma^2).

    The optimal rejection rule for a Gaussian pair is a threshold test;
    thresholds are placed at the exact H0 quantiles for each alpha and
    the Type-II error is the empirical H1 mass below the threshold.
    The estimate must bracket G_mu within a few binomial standard errors.
    """
    if samples < 10_000:
        raise ValueError("use at least 1e4 samples")
    alphas = np.asarray(alphas, dtype=np.float64)
    rng = _chunk_rng(seed, 0)
    h1 = rng.normal(mu_true * sigma, sigma, size=samples)
    thresholds = sigma * phi_inv_vec(1.0 - alphas)
    betas = np.empty_like(alphas)
    for i, t in enumerate(thresholds):
        if math.isinf(t):
            betas[i] = 1.0 if t > 0 else 0.0
        else:
            betas[i] = float(np.mean(h1 < t))
    stderr = np.sqrt(np.maximum(betas * (1.0 - betas), 1e-12) / samples)
    return EmpiricalTradeoff(
        alphas=alphas, betas=betas, stderr=stderr, mu=mu_true, samples=samples, seed=seed
    )


@maybe_njit
def _inf_scan2_gauss(mu1, mu2, q1, q2, alpha, step):
    best = math.inf
    n = int(1.0 / step) + 1
    found = False
    for i in range(n):
        a1 = i * step
        if a1 > 1.0:
            a1 = 1.0
        a2 = (alpha - q1 * a1) / q2
        if a2 < 0.0 or a2 > 1.0:
            continue
        found = True
        val = q1 * gauss_beta(mu1, a1) + q2 * gauss_beta(mu2, a2)
        if val < best:
            best = val
    if not found:
        return math.nan
    return best


def _curve_of(component) -> TradeoffCurve:
    if isinstance(component, TradeoffCurve):
        return component
    return TradeoffCurve.gaussian(float(component))


def infimum_oracle(components, alpha: float, step: float = 1e-4) -> float:
    """Constrained infimum sum_i q_i f_i(alpha_i) over sum_i q_i alpha_i = alpha.

    Exhaustive grid search with the last alpha_i eliminated through the
    constraint; supports up to three components.  Refining the step can
    only lower the result (the grids are nested for halved steps).
    """
    comps = [(_curve_of(c), float(q)) for c, q in components]
    if not 1 <= len(comps) <= 3:
        raise ValueError("infimum oracle supports 1 to 3 components")
    if step > 1e-3:
        raise ValueError("step must be <= 1e-3")
    if abs(sum(q for _, q in comps) - 1.0) > 1e-9:
        raise ValueError("component masses must sum to 1")
    if len(comps) == 1:
        return float(comps[0][0](alpha))
    grid = np.arange(0.0, 1.0 + step / 2, step)
    grid = np.clip(grid, 0.0, 1.0)
    if len(comps) == 2:
        (f1, q1), (f2, q2) = comps
        if (
            NUMBA_ENABLED
            and f1.kind == "gaussian"
            and f2.kind == "gaussian"
        ):
            best = float(_inf_scan2_gauss(f1.mu, f2.mu, q1, q2, float(alpha), step))
            if math.isnan(best):
                raise ValueError("no feasible grid point for the constraint")
            return best
        a1 = grid
        a2 = (alpha - q1 * a1) / q2
        mask = (a2 >= 0.0) & (a2 <= 1.0)
        if not np.any(mask):
            raise ValueError("no feasible grid point for the constraint")
        vals = q1 * f1(a1[mask]) + q2 * f2(a2[mask])
        return float(np.min(vals))
    (f1, q1), (f2, q2), (f3, q3) = comps
    best = math.inf
    f2_grid = f2(grid)
    for a1, f1val in zip(grid, f1(grid)):
        a3 = (alpha - q1 * a1 - q2 * grid) / q3
        mask = (a3 >= 0.0) & (a3 <= 1.0)
        if not np.any(mask):
            continue
        vals = q1 * f1val + q2 * f2_grid[mask] + q3 * f3(a3[mask])
        m = float(np.min(vals))
        if m < best:
            best = m
    if math.isinf(best):
        raise ValueError("no feasible grid point for the constraint")
    return best
