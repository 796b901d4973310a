"""Sampler-induced distributions over round sensitivity counts.

One training round touches k of the g marked (differentiating) samples
through its m size-s subsets; the round's update then has sensitivity
2kC and Gaussian trade-off G_{k/sigma}.  Counting rounds per level k
across an epoch (or E epochs) gives a vector (c_1, ..., c_g) and the
aggregate shift magnitude c^2 = sum_k c_k k^2.  This module computes
the exact per-round level distributions for subsampling and shuffling,
convolves them across rounds and epochs into the c^2 distribution, and
derives the closed-form tail parameters used by the guarantee engine.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .mixture import TailParams

__all__ = [
    "SamplerConfig",
    "RoundKDist",
    "CVecDist",
    "HoeffdingTails",
    "qk_ic_subsampling",
    "ic_round_dist",
    "qk_general_subsampling",
    "general_round_dist",
    "multiround_cdist",
    "epoch_convolve",
    "qdist_bc_shuffling",
    "bc_ss_q1",
    "hoeffding_tails",
    "shuffling_tail_params",
    "filter_transform",
    "joint_to_c2",
    "EXACT_MS_LIMIT",
    "EXACT_G_LIMIT",
]

EPS_TRUNC = 1e-12
EXACT_MS_LIMIT = 64
EXACT_G_LIMIT = 8

STRATEGIES = ("SS", "SH")
CLIPPINGS = ("IC", "BC", "GEN")


@dataclass(frozen=True)
class SamplerConfig:
    """One sampler/clipping configuration of the training framework.

    N: data set size; s: samples per inner computation; m: computations
    per round; E: epochs; g: group size.  IC fixes s = 1 and BC fixes
    m = 1; GEN allows both free.  An epoch has N/(m*s) rounds.
    """

    N: int
    s: int
    m: int
    E: int
    g: int
    strategy: str = "SS"
    clipping: str = "GEN"

    def __post_init__(self):
        for name in ("N", "s", "m", "E", "g"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.clipping not in CLIPPINGS:
            raise ValueError(f"clipping must be one of {CLIPPINGS}")
        if self.clipping == "IC" and self.s != 1:
            raise ValueError("individual clipping requires s = 1")
        if self.clipping == "BC" and self.m != 1:
            raise ValueError("batch clipping requires m = 1")
        if self.N % (self.m * self.s) != 0:
            raise ValueError("N must be divisible by m*s")
        if self.g > self.N:
            raise ValueError("group size cannot exceed N")

    @property
    def rounds_per_epoch(self) -> int:
        return self.N // (self.m * self.s)


@dataclass(frozen=True)
class RoundKDist:
    """Per-round distribution of the level k = number of touched subsets."""

    probs: np.ndarray

    def __init__(self, probs):
        p = np.asarray(probs, dtype=np.float64)
        if p.ndim != 1 or p.size < 1 or np.any(p < -1e-15):
            raise ValueError("probs must be a nonnegative 1-d array")
        if abs(float(p.sum()) - 1.0) > 1e-12:
            raise ValueError("round distribution must sum to 1 within 1e-12")
        object.__setattr__(self, "probs", np.clip(p, 0.0, 1.0))

    @property
    def max_level(self) -> int:
        return self.probs.size - 1


@dataclass(frozen=True)
class CVecDist:
    """Distribution of the aggregate c^2 = sum_k c_k k^2 (integer support)."""

    probs: np.ndarray  # probs[i] = P[c^2 = i]
    truncated_mass: float = 0.0

    def __init__(self, probs, truncated_mass: float = 0.0):
        p = np.asarray(probs, dtype=np.float64)
        if p.ndim != 1 or np.any(p < -1e-15):
            raise ValueError("probs must be a nonnegative 1-d array")
        total = float(p.sum()) + truncated_mass
        if not (1.0 - 1e-10) <= total <= 1.0 + 1e-10:
            raise ValueError(f"c^2 distribution mass {total} not within 1e-10 of 1")
        object.__setattr__(self, "probs", np.clip(p, 0.0, 1.0))
        object.__setattr__(self, "truncated_mass", float(truncated_mass))

    def items(self):
        for c2, p in enumerate(self.probs):
            if p > 0.0:
                yield int(c2), float(p)

    def as_dict(self) -> dict:
        return {c2: p for c2, p in self.items()}

    def mean(self) -> float:
        return float(np.dot(np.arange(self.probs.size), self.probs))

    def to_json(self) -> str:
        return json.dumps({str(c2): p for c2, p in self.items()})

    def to_csv(self) -> str:
        lines = ["c2,prob"]
        lines.extend(f"{c2},{p:.12g}" for c2, p in self.items())
        return "\n".join(lines) + "\n"


def _log_comb(n: int, k: int) -> float:
    if k < 0 or k > n:
        return -math.inf
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def qk_ic_subsampling(N: int, m: int, g: int, k: int) -> float:
    """Hypergeometric round-level probability for individual clipping.

    q_k = C(N-g, m-k) C(g, k) / C(N, m); zero for k beyond min(m, g).
    Uses log-gamma binomials to avoid overflow.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if m > N:
        raise ValueError("m cannot exceed N")
    if k > m or k > g:
        return 0.0
    ln = _log_comb(N - g, m - k) + _log_comb(g, k) - _log_comb(N, m)
    return math.exp(ln) if ln > -math.inf else 0.0


def ic_round_dist(N: int, m: int, g: int) -> RoundKDist:
    kmax = min(m, g)
    probs = np.array([qk_ic_subsampling(N, m, g, k) for k in range(kmax + 1)])
    return RoundKDist(probs / probs.sum())


def _partitions(total: int, parts: int, cap: int):
    """Partitions of `total` into exactly `parts` parts, each in [1, cap]."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(min(total - parts + 1, cap), 0, -1):
        for rest in _partitions(total - first, parts - 1, min(cap, first)):
            yield (first,) + rest


def qk_general_subsampling(
    N: int,
    m: int,
    s: int,
    g: int,
    k: int,
    mc_trials: int | None = None,
    seed: int = 20240,
):
    """Round-level probability for general clipping under subsampling.

    Exact evaluation sums the multinomial ratio over all ways to place
    k' <= g differentiating samples into exactly k of the m size-s
    subsets; it is limited to m*s <= 64 and g <= 8.  Passing mc_trials
    switches to a Monte Carlo estimate and returns (estimate, stderr).
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k > min(m, g):
        return (0.0, 0.0) if mc_trials else 0.0
    if m * s > N:
        raise ValueError("m*s cannot exceed N")
    if mc_trials is not None:
        return _qk_general_mc(N, m, s, g, k, mc_trials, seed)
    if m * s > EXACT_MS_LIMIT or g > EXACT_G_LIMIT:
        raise ValueError(
            f"exact path limited to m*s <= {EXACT_MS_LIMIT} and g <= {EXACT_G_LIMIT}; "
            "pass mc_trials for an estimate"
        )
    ms = m * s
    ln_denom = _log_comb(N, ms) + math.lgamma(ms + 1) - m * math.lgamma(s + 1)
    if k == 0:
        # no subset touches a marked sample: all ms draws from the N-g pool
        return math.exp(_log_comb(N - g, ms) - _log_comb(N, ms))
    total = 0.0
    for kp in range(k, min(g, k * s) + 1):
        for part in _partitions(kp, k, s):
            counts = {}
            for v in part:
                counts[v] = counts.get(v, 0) + 1
            ln_arrangements = (
                _log_comb(m, k)
                + math.lgamma(k + 1)
                - sum(math.lgamma(c + 1) for c in counts.values())
            )
            ln_mult_marked = math.lgamma(kp + 1) - sum(
                math.lgamma(v + 1) for v in part
            )
            ln_mult_rest = (
                math.lgamma(ms - kp + 1)
                - sum(math.lgamma(s - v + 1) for v in part)
                - (m - k) * math.lgamma(s + 1)
            )
            ln_term = (
                _log_comb(N - g, ms - kp)
                + _log_comb(g, kp)
                + ln_mult_marked
                + ln_mult_rest
                + ln_arrangements
                - ln_denom
            )
            if ln_term > -math.inf:
                total += math.exp(ln_term)
    return total


def _qk_general_mc(N, m, s, g, k, trials, seed):
    rng = np.random.Generator(np.random.Philox(key=seed))
    hits = 0
    chunk = 4096
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        u = rng.random((n, N))
        order = np.argsort(u, axis=1)
        subsets = order[:, : m * s].reshape(n, m, s)
        touched = (subsets < g).any(axis=2).sum(axis=1)
        hits += int(np.sum(touched == k))
        done += n
    p = hits / trials
    se = math.sqrt(max(p * (1.0 - p), 1e-300) / trials)
    return p, se


def general_round_dist(N: int, m: int, s: int, g: int) -> RoundKDist:
    kmax = min(m, g)
    probs = np.array(
        [qk_general_subsampling(N, m, s, g, k) for k in range(kmax + 1)]
    )
    return RoundKDist(probs / probs.sum())


def multiround_cdist(
    round_dist: RoundKDist, rounds: int, eps_trunc: float = EPS_TRUNC
) -> CVecDist:
    """Distribution of c^2 over i.i.d. rounds, by direct convolution.

    Equivalent to marginalizing the multinomial count vector onto
    c^2 = sum_k c_k k^2; the smallest tail entries are dropped once
    their cumulative mass stays below eps_trunc (reported).
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    levels = np.arange(round_dist.probs.size)
    step = np.zeros(int(levels[-1] ** 2) + 1)
    for k, p in zip(levels, round_dist.probs):
        step[k * k] += p
    acc = _conv_power(step, rounds)
    return _truncate(acc, eps_trunc)


def _conv_power(step: np.ndarray, n: int) -> np.ndarray:
    """n-fold self-convolution by square-and-multiply."""
    result = np.array([1.0])
    base = step
    while n > 0:
        if n & 1:
            result = np.convolve(result, base)
        n >>= 1
        if n:
            base = np.convolve(base, base)
    return result


def _truncate(probs: np.ndarray, eps_trunc: float) -> CVecDist:
    probs = np.clip(probs, 0.0, None)
    order = np.argsort(probs)
    cum = np.cumsum(probs[order])
    drop = order[cum < eps_trunc]
    truncated = float(probs[drop].sum())
    out = probs.copy()
    out[drop] = 0.0
    last = np.nonzero(out)[0]
    out = out[: last[-1] + 1] if last.size else out[:1]
    return CVecDist(out, truncated_mass=truncated)


def epoch_convolve(per_epoch: CVecDist, E: int, eps_trunc: float = EPS_TRUNC) -> CVecDist:
    """E-fold convolution of the per-epoch c^2 distribution (epochs i.i.d.)."""
    if E < 1:
        raise ValueError("E must be >= 1")
    if E == 1:
        return per_epoch
    total = per_epoch.probs.sum()
    acc = _conv_power(per_epoch.probs / total, E) * total**E
    dist = _truncate(acc, eps_trunc)
    carried = 1.0 - total**E  # mass already truncated in the input
    return CVecDist(dist.probs, truncated_mass=dist.truncated_mass + carried)


def qdist_bc_shuffling(N: int, s: int, g: int) -> CVecDist:
    """Per-epoch distribution of occupied rounds for batch clipping + shuffling.

    Placing g marked samples into N/s rounds of s slots is a balls-in-bins
    problem: q_j = C(N/s, j) C(g-1, j-1) / C(N/s - 1 + g, g) for the number
    j of occupied rounds, valid for g <= s.  With m = 1 the per-epoch
    aggregate is c^2 = j.
    """
    if N % s != 0:
        raise ValueError("s must divide N")
    if g > s:
        raise ValueError(
            "exact balls-in-bins distribution requires g <= s "
            "(only the zero-tail lower bound applies beyond)"
        )
    M = N // s
    if g > M * s:
        raise ValueError("cannot place g marked samples")
    denom = math.comb(M - 1 + g, g)
    probs = np.zeros(g + 1)
    for j in range(1, g + 1):
        probs[j] = math.comb(M, j) * math.comb(g - 1, j - 1) / denom
    return CVecDist(probs)


def bc_ss_q1(N: int, s: int, g: int) -> float:
    """Per-round touch probability for batch clipping under subsampling."""
    return -math.expm1(_log_comb(N - g, s) - _log_comb(N, s))


@dataclass(frozen=True)
class HoeffdingTails:
    lower: TailParams
    upper: TailParams | None
    degenerate: bool = False


def hoeffding_tails(E_eff: float) -> HoeffdingTails:
    """Tail parameters from the Hoeffding bound on the binomial round count.

    (c^L)^2 = (1 + 1/sqrt(2E)) E with mass e^-E, and
    (c^U)^2 = (1 - 1/sqrt(2E)) E with mass e^-E.  For E_eff < 1/2 the
    upper cutoff would be nonpositive; it is flagged degenerate and omitted.
    """
    if E_eff <= 0.0:
        raise ValueError("E_eff must be positive")
    mass = math.exp(-E_eff)
    shift = 1.0 / math.sqrt(2.0 * E_eff)
    lower = TailParams("lower", math.sqrt((1.0 + shift) * E_eff), min(mass, 1.0))
    cu2 = (1.0 - shift) * E_eff
    if cu2 <= 0.0:
        warnings.warn(
            f"E_eff={E_eff:g} < 1/2 makes the upper Hoeffding cutoff degenerate",
            RuntimeWarning,
            stacklevel=2,
        )
        return HoeffdingTails(lower, None, degenerate=True)
    upper = TailParams("upper", math.sqrt(cu2), min(mass, 1.0))
    return HoeffdingTails(lower, upper)


def shuffling_tail_params(N: int, m: int, s: int, g: int):
    """Per-epoch tail parameters for shuffling.

    Lower: c^L = sqrt(g) with mass g^2 m s / (N - g), from the probability
    that the marked samples land in g distinct rounds.  Upper (batch
    clipping only): c^U = sqrt(g) with mass g^2 / (N/s - g - g^2), present
    when m = 1, g <= s and N/s > g + g^2.
    """
    if N <= g:
        raise ValueError("N must exceed g")
    lower = TailParams("lower", math.sqrt(g), min(g * g * m * s / (N - g), 1.0))
    upper = None
    if m == 1 and g <= s and N % s == 0 and N // s > g + g * g:
        upper = TailParams("upper", math.sqrt(g), g * g / (N // s - g - g * g))
    return lower, upper


def _binom_half(k: int) -> np.ndarray:
    return np.array([math.comb(k, j) for j in range(k + 1)]) / 2.0**k


def filter_transform(joint: dict) -> dict:
    """Redistribute round levels through the probabilistic keep-half filter.

    Each round counted at level k moves to level k' with binomial
    C(k, k')/2^k weight (k' = 0 drops the round).  Input and output map
    level-count vectors (c_1, ..., c_g) to probabilities; the output
    remains a distribution.
    """
    if not joint:
        raise ValueError("empty joint distribution")
    out: dict = {}
    for vec, p in joint.items():
        if p < 0.0:
            raise ValueError("negative probability in joint distribution")
        g = len(vec)
        # per source level k, distribute its c_k rounds over levels 0..k
        level_outcomes = []
        for k, ck in enumerate(vec, start=1):
            if ck == 0:
                continue
            w = _binom_half(k)
            outcomes = []
            for split in itertools.product(range(ck + 1), repeat=k):
                n0 = ck - sum(split)
                if n0 < 0:
                    continue
                counts = (n0,) + split  # landed at levels 0..k
                ln = math.lgamma(ck + 1) - sum(math.lgamma(c + 1) for c in counts)
                prob = math.exp(ln) * float(np.prod(w**np.array(counts)))
                outcomes.append((split, prob))
            level_outcomes.append((k, outcomes))
        for combo in itertools.product(*(o for _, o in level_outcomes)):
            new = [0] * g
            q = p
            for (k, _), (split, prob) in zip(level_outcomes, combo):
                q *= prob
                for j, n in enumerate(split, start=1):
                    new[j - 1] += n
            key = tuple(new)
            out[key] = out.get(key, 0.0) + q
    return out


def joint_to_c2(joint: dict) -> CVecDist:
    """Marginalize a level-count vector distribution onto c^2."""
    max_c2 = max(
        (sum(c * (k + 1) ** 2 for k, c in enumerate(vec)) for vec in joint), default=0
    )
    probs = np.zeros(int(max_c2) + 1)
    for vec, p in joint.items():
        c2 = sum(c * (k + 1) ** 2 for k, c in enumerate(vec))
        probs[int(c2)] += p
    return CVecDist(probs)
