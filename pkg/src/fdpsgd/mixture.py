"""Mixtures of Gaussian trade-off curves and their closed-form bounds.

A sampler-induced distribution over noise-to-shift ratios c (at noise
scale sigma) yields a mechanism that runs the Gaussian sub-mechanism
G_{c/sigma} with probability q(c).  The exact trade-off curve of the
mixture solves a one-dimensional root problem in the Lagrange variable
Lambda:

    1 - alpha = sum_i q_i * Phi(Lambda/mu_i + mu_i/2),   mu_i = c_i/sigma
    f(alpha)  = sum_i q_i * Phi(Lambda/mu_i - mu_i/2)

Mass at c = 0 contributes a perfect-privacy component whose optimal
slope is -1; it appears as a jump of size q_0 in the residual at
Lambda = 0 and produces a linear slope -1 segment in the curve.

Tail mass bounds on q(c) give closed-form sandwich curves: a lower
bound G_{cL/sigma}(min{1, alpha + l}) symmetrized into a two-piece
curve with knee beta solving G(beta) - l = beta, and an upper bound
u + (1-u) G_{cU/sigma}(alpha) convexified into a three-piece curve with
slope -1 knots beta0, beta1 in closed form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ._backend import NUMBA_ENABLED, maybe_njit
from ._normal import gauss_beta, gauss_beta_vec, gauss_slope, phi, phi_vec
from .curves import TradeoffCurve, default_alphas

__all__ = [
    "MixtureSpec",
    "TailParams",
    "solve_lambda",
    "mixture_tradeoff",
    "mixture_curve",
    "lower_bound_curve",
    "upper_bound_curve",
    "lower_knee",
    "upper_knots",
    "eval_lower_bound",
    "eval_upper_bound",
    "sandwich_check",
    "EPS_TRUNC",
]

EPS_TRUNC = 1e-12

_LAMBDA_LIMIT = 50.0
_RESIDUAL_TOL = 1e-10
_MAX_ITER = 200


class NoConvergenceError(RuntimeError):
    """Raised when the Lambda bracket cannot be established."""


@dataclass(frozen=True)
class MixtureSpec:
    """Distribution over Gaussian shift magnitudes c at noise scale sigma.

    Components are (c, q) pairs with strictly increasing c >= 0 and masses
    summing to 1; a component at c = 0 is the perfect-privacy part.
    """

    components: tuple
    sigma: float

    def __init__(self, components, sigma):
        if sigma <= 0.0:
            raise ValueError("sigma must be positive")
        merged: dict = {}
        for c, q in components:
            c, q = float(c), float(q)
            if c < 0.0:
                raise ValueError("c values must be nonnegative")
            if not 0.0 < q <= 1.0:
                raise ValueError("masses must lie in (0, 1]")
            merged[c] = merged.get(c, 0.0) + q
        if not merged:
            raise ValueError("mixture needs at least one component")
        comps = tuple(sorted(merged.items()))
        if abs(sum(q for _, q in comps) - 1.0) > 1e-12:
            raise ValueError("masses must sum to 1 within 1e-12")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "sigma", float(sigma))

    @property
    def zero_mass(self) -> float:
        return self.components[0][1] if self.components[0][0] == 0.0 else 0.0

    def positive_parts(self):
        """(mus, qs) arrays for the c > 0 components."""
        pos = [(c / self.sigma, q) for c, q in self.components if c > 0.0]
        mus = np.array([m for m, _ in pos], dtype=np.float64)
        qs = np.array([q for _, q in pos], dtype=np.float64)
        return mus, qs

    def tail_above(self, c_star: float) -> float:
        return sum(q for c, q in self.components if c > c_star)

    def tail_below(self, c_star: float) -> float:
        return sum(q for c, q in self.components if c < c_star)

    def to_json(self) -> str:
        return json.dumps(
            {"sigma": self.sigma, "components": [[c, q] for c, q in self.components]}
        )

    @classmethod
    def from_json(cls, text: str) -> "MixtureSpec":
        obj = json.loads(text)
        return cls(obj["components"], obj["sigma"])

    @classmethod
    def from_c2_probs(cls, c2_probs: dict, sigma: float) -> "MixtureSpec":
        """Build a spec from a {c^2: prob} map, with upper-tail folding.

        Components whose cumulative upper-tail mass stays below EPS_TRUNC
        are dropped and their mass folded into the largest retained c, then
        masses are renormalized to absorb floating-point drift.
        """
        items = sorted((float(c2), float(p)) for c2, p in c2_probs.items() if p > 0.0)
        if not items:
            raise ValueError("empty distribution")
        tail = 0.0
        cut = len(items)
        for i in range(len(items) - 1, 0, -1):
            if tail + items[i][1] >= EPS_TRUNC:
                break
            tail += items[i][1]
            cut = i
        kept = items[:cut]
        comps = [(math.sqrt(c2), p) for c2, p in kept]
        comps[-1] = (comps[-1][0], comps[-1][1] + tail)
        total = sum(q for _, q in comps)
        comps = [(c, q / total) for c, q in comps]
        return cls(comps, sigma)


@dataclass(frozen=True)
class TailParams:
    """One-sided mass bound on a mixture: side, cutoff c_star, tail mass."""

    side: str
    c_star: float
    mass: float

    def __post_init__(self):
        if self.side not in ("lower", "upper"):
            raise ValueError("side must be 'lower' or 'upper'")
        if self.c_star <= 0.0:
            raise ValueError("c_star must be positive")
        if not 0.0 <= self.mass <= 1.0:
            raise ValueError("mass must lie in [0, 1]")

    def validate_against(self, spec: MixtureSpec, slack: float = 1e-12) -> None:
        """Check the mass actually bounds the spec's tail on this side."""
        if self.side == "lower":
            actual = spec.tail_above(self.c_star)
        else:
            actual = spec.tail_below(self.c_star)
        if self.mass + slack < actual:
            raise ValueError(
                f"{self.side} tail mass {self.mass:.3e} below actual {actual:.3e}"
            )


# --- Lambda root solve ----------------------------------------------------
#
# The residual R(Lambda) = sum q_i Phi(Lambda/mu_i + mu_i/2) is strictly
# increasing, so bisection is safe; two clamped secant steps polish the
# root after the bracket is tight.


@maybe_njit
def _residual(lam, mus, qs):
    total = 0.0
    for i in range(mus.shape[0]):
        total += qs[i] * phi(lam / mus[i] + 0.5 * mus[i])
    return total


@maybe_njit
def _solve_continuous(mus, qs, target):
    """Root of _residual(lam) = target; returns nan if bracket exceeds 50."""
    lo = 0.0
    hi = 0.0
    if _residual(0.0, mus, qs) < target:
        hi = 1.0
        while _residual(hi, mus, qs) < target:
            hi *= 2.0
            if hi > _LAMBDA_LIMIT:
                return math.nan
    else:
        lo = -1.0
        while _residual(lo, mus, qs) > target:
            lo *= 2.0
            if lo < -_LAMBDA_LIMIT:
                return math.nan
    a, b = lo, hi
    fa = _residual(a, mus, qs) - target
    mid = 0.5 * (a + b)
    for _ in range(_MAX_ITER):
        mid = 0.5 * (a + b)
        fm = _residual(mid, mus, qs) - target
        if abs(fm) <= 1e-12 or (b - a) < 1e-13:
            break
        if (fm > 0.0) == (fa > 0.0):
            a = mid
            fa = fm
        else:
            b = mid
    lam = mid
    for _ in range(2):
        f1 = _residual(a, mus, qs) - target
        f2 = _residual(b, mus, qs) - target
        if f2 != f1:
            cand = a - f1 * (b - a) / (f2 - f1)
            if a < cand < b:
                fc = _residual(cand, mus, qs) - target
                if abs(fc) < abs(_residual(lam, mus, qs) - target):
                    lam = cand
                if (fc > 0.0) == (f1 > 0.0):
                    a = cand
                else:
                    b = cand
    return lam


@maybe_njit
def _mixture_value(alpha, mus, qs, q0):
    if alpha <= 0.0:
        return 1.0
    if alpha >= 1.0:
        return 0.0
    target = 1.0 - alpha
    r0 = _residual(0.0, mus, qs)
    if r0 <= target <= r0 + q0:
        # Lambda pinned at the q0 jump: linear slope -1 segment
        val = target - r0
        for i in range(mus.shape[0]):
            val += qs[i] * phi(-0.5 * mus[i])
        return val
    shifted = target - q0 if target > r0 + q0 else target
    lam = _solve_continuous(mus, qs, shifted)
    if math.isnan(lam):
        return math.nan
    val = q0 if lam > 0.0 else 0.0
    for i in range(mus.shape[0]):
        val += qs[i] * phi(lam / mus[i] - 0.5 * mus[i])
    return val


@maybe_njit
def _mixture_batch_nb(alphas, mus, qs, q0):
    out = np.empty(alphas.shape[0])
    for i in range(alphas.shape[0]):
        out[i] = _mixture_value(alphas[i], mus, qs, q0)
    return out


def _residual_np(lams, mus, qs):
    lams = np.atleast_1d(lams)
    return phi_vec(lams[:, None] / mus[None, :] + 0.5 * mus[None, :]) @ qs


def _mixture_batch_np(alphas, mus, qs, q0):
    """Vectorized bisection fallback; same math as the numba kernel."""
    alphas = np.asarray(alphas, dtype=np.float64)
    out = np.empty_like(alphas)
    out[alphas <= 0.0] = 1.0
    out[alphas >= 1.0] = 0.0
    interior = (alphas > 0.0) & (alphas < 1.0)
    if not np.any(interior):
        return out
    target = 1.0 - alphas[interior]
    r0 = float(_residual_np(0.0, mus, qs)[0])
    jump = (target >= r0) & (target <= r0 + q0)
    above = target > r0 + q0
    shifted = np.where(above, target - q0, target)

    vals = np.empty_like(target)
    base = float(np.sum(qs * phi_vec(-0.5 * mus)))
    vals[jump] = base + (target[jump] - r0)

    solve = ~jump
    if np.any(solve):
        t = shifted[solve]
        lo = np.zeros_like(t)
        hi = np.zeros_like(t)
        need_pos = _residual_np(0.0, mus, qs)[0] < t
        hi[need_pos] = 1.0
        lo[~need_pos] = -1.0
        for _ in range(8):
            r_hi = _residual_np(hi, mus, qs)
            grow = need_pos & (r_hi < t)
            hi = np.where(grow, hi * 2.0, hi)
            r_lo = _residual_np(lo, mus, qs)
            grow_n = ~need_pos & (r_lo > t)
            lo = np.where(grow_n, lo * 2.0, lo)
        if np.any(np.abs(hi) > _LAMBDA_LIMIT) or np.any(np.abs(lo) > _LAMBDA_LIMIT):
            raise NoConvergenceError("Lambda bracket exceeded +/-50")
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            below = _residual_np(mid, mus, qs) < t
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        lam = 0.5 * (lo + hi)
        v = phi_vec(lam[:, None] / mus[None, :] - 0.5 * mus[None, :]) @ qs
        v = v + np.where(lam > 0.0, q0, 0.0)
        vals[solve] = v
    out[interior] = vals
    return out


def _parts(spec: MixtureSpec):
    mus, qs = spec.positive_parts()
    if mus.size == 0:
        raise ValueError("mixture needs at least one component with c > 0")
    return mus, qs, spec.zero_mass


def solve_lambda(spec: MixtureSpec, alpha: float) -> float:
    """Lagrange variable of the mixture curve at alpha.

    Endpoints return +/-inf sentinels; a value of exactly 0.0 marks the
    q0 jump segment where the constraint is absorbed by the c = 0 mass.
    """
    mus, qs, q0 = _parts(spec)
    if alpha <= 0.0:
        return math.inf
    if alpha >= 1.0:
        return -math.inf
    target = 1.0 - alpha
    r0 = float(_residual(0.0, mus, qs)) if NUMBA_ENABLED else float(
        _residual_np(0.0, mus, qs)[0]
    )
    if r0 <= target <= r0 + q0 and q0 > 0.0:
        return 0.0
    shifted = target - q0 if target > r0 + q0 else target
    lam = float(_solve_continuous(mus, qs, shifted))
    if math.isnan(lam):
        raise NoConvergenceError("Lambda bracket exceeded +/-50 without sign change")
    return lam


def mixture_tradeoff(spec: MixtureSpec, alpha: float) -> float:
    """Exact mixture trade-off value f(alpha)."""
    mus, qs, q0 = _parts(spec)
    val = float(_mixture_value(float(alpha), mus, qs, q0))
    if math.isnan(val):
        raise NoConvergenceError("Lambda bracket exceeded +/-50 without sign change")
    return val


def mixture_batch(spec: MixtureSpec, alphas) -> np.ndarray:
    """f(alpha) on an array of alphas, using the active backend."""
    mus, qs, q0 = _parts(spec)
    alphas = np.asarray(alphas, dtype=np.float64)
    if NUMBA_ENABLED:
        out = _mixture_batch_nb(alphas, mus, qs, q0)
        if np.any(np.isnan(out)):
            raise NoConvergenceError("Lambda bracket exceeded +/-50 without sign change")
        return out
    return _mixture_batch_np(alphas, mus, qs, q0)


def mixture_curve(spec: MixtureSpec, n: int = 4097) -> TradeoffCurve:
    """Grid representation of the exact mixture trade-off curve."""
    a = default_alphas(n)
    return TradeoffCurve.grid(a, np.clip(mixture_batch(spec, a), 0.0, 1.0), symmetric=True)


# --- closed-form tail bounds ------------------------------------------------


def lower_knee(mu: float, l: float) -> float:
    """Knee beta of the symmetrized lower bound: G_mu(beta) - l = beta."""
    if not 0.0 <= l <= 1.0:
        raise ValueError("tail mass must lie in [0, 1]")
    lo, hi = 0.0, 1.0
    for _ in range(_MAX_ITER):
        mid = 0.5 * (lo + hi)
        r = gauss_beta(mu, mid) - l - mid
        if abs(r) <= _RESIDUAL_TOL and (hi - lo) < 1e-12:
            break
        if r > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def eval_lower_bound(alpha, mu: float, l: float, beta: float | None = None):
    """Symmetrized lower-bound curve: G(alpha)-l on [0,beta], shifted G after."""
    if beta is None:
        beta = lower_knee(mu, l)
    alpha = np.asarray(alpha, dtype=np.float64)
    left = gauss_beta_vec(mu, alpha) - l
    right = gauss_beta_vec(mu, np.minimum(1.0, alpha + l))
    return np.maximum(np.where(alpha <= beta, left, right), 0.0)


def lower_bound_curve(tail: TailParams, sigma: float, n: int = 4097) -> TradeoffCurve:
    """Piecewise lower-bound trade-off curve from a lower tail bound."""
    if tail.side != "lower":
        raise ValueError("lower_bound_curve needs a lower tail")
    if tail.mass > 1.0:
        raise ValueError("tail mass above 1")
    mu = tail.c_star / sigma
    beta = lower_knee(mu, tail.mass)
    a = np.unique(np.concatenate([default_alphas(n), [beta]]))
    a[0], a[-1] = 0.0, 1.0
    return TradeoffCurve.grid(a, eval_lower_bound(a, mu, tail.mass, beta), symmetric=True)


def upper_knots(mu: float, u: float):
    """Slope -1 knots (beta0, beta1) of the convexified upper bound."""
    if not 0.0 <= u < 1.0:
        raise ValueError("upper tail mass must lie in [0, 1)")
    log1mu = math.log1p(-u)
    beta0 = 1.0 - phi(0.5 * mu - log1mu / mu)
    beta1 = u + (1.0 - u) * (1.0 - phi(0.5 * mu + log1mu / mu))
    if beta0 > beta1 + 1e-12:
        raise ValueError("upper-bound knots out of order")
    return beta0, beta1


def eval_upper_bound(alpha, mu: float, u: float, knots=None):
    """Convexified upper-bound curve: scaled G, slope -1 segment, inverse piece."""
    if knots is None:
        knots = upper_knots(mu, u)
    beta0, beta1 = knots
    alpha = np.asarray(alpha, dtype=np.float64)
    head = u + (1.0 - u) * gauss_beta_vec(mu, alpha)
    line = beta0 + beta1 - alpha
    arg = np.clip((alpha - u) / (1.0 - u), 0.0, 1.0)
    tail_piece = gauss_beta_vec(mu, arg)
    out = np.where(alpha <= beta0, head, np.where(alpha <= beta1, line, tail_piece))
    return np.clip(out, 0.0, 1.0)


def upper_bound_curve(tail: TailParams, sigma: float, n: int = 4097) -> TradeoffCurve:
    """Piecewise convexified upper-bound trade-off curve from an upper tail."""
    if tail.side != "upper":
        raise ValueError("upper_bound_curve needs an upper tail")
    if tail.mass >= 1.0:
        raise ValueError("upper tail mass must be below 1")
    mu = tail.c_star / sigma
    beta0, beta1 = upper_knots(mu, tail.mass)
    # knot consistency: slope -1 on both sides of the linear segment
    if tail.mass > 0.0:
        s0 = (1.0 - tail.mass) * gauss_slope(mu, beta0)
        s1 = gauss_slope(mu, (beta1 - tail.mass) / (1.0 - tail.mass)) / (1.0 - tail.mass)
        if abs(s0 + 1.0) > 1e-6 or abs(s1 + 1.0) > 1e-6:
            raise AssertionError("upper-bound knot slopes deviate from -1")
    a = np.unique(np.concatenate([default_alphas(n), [beta0, beta1]]))
    a[0], a[-1] = 0.0, 1.0
    return TradeoffCurve.grid(
        a, eval_upper_bound(a, mu, tail.mass, (beta0, beta1)), symmetric=True
    )


def sandwich_check(
    spec: MixtureSpec,
    lower: TailParams,
    upper: TailParams,
    grid=None,
) -> dict:
    """Verify hat-lower <= lower <= exact mixture <= upper <= hat-upper.

    Returns a report {"max_violation", "argmax_alpha"} rather than raising,
    so inverted tails can be used as negative controls.
    """
    if grid is None:
        grid = default_alphas(1025)
    grid = np.asarray(grid, dtype=np.float64)
    mu_l = lower.c_star / spec.sigma
    mu_u = upper.c_star / spec.sigma
    hat_lower = gauss_beta_vec(mu_l, np.minimum(1.0, grid + lower.mass))
    low = eval_lower_bound(grid, mu_l, lower.mass)
    exact = mixture_batch(spec, grid)
    up = eval_upper_bound(grid, mu_u, upper.mass)
    hat_upper = upper.mass + (1.0 - upper.mass) * gauss_beta_vec(mu_u, grid)
    gaps = np.stack([hat_lower - low, low - exact, exact - up, up - hat_upper])
    flat = np.max(gaps, axis=0)
    idx = int(np.argmax(flat))
    return {
        "max_violation": float(max(flat[idx], 0.0)),
        "argmax_alpha": float(grid[idx]),
    }
