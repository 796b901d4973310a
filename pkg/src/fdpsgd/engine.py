"""Theorem-level API: sampler configuration -> privacy guarantee bundle.

Each supported strategy/clipping/group-size combination maps to its
closed-form analysis:

* subsampling, g = 1 (any clipping): Hoeffding sandwich around
  G_{sqrt(E)/sigma} with cutoffs (1 +/- 1/sqrt(2E)) E and masses e^-E;
* subsampling, individual clipping, g >= 2: lower bound with
  c^L = sqrt(beta * min(m, g) * g * E), beta = e^{N/(N-g-m)} + gamma,
  mass e^{-gamma g E}; no nontrivial upper bound is known;
* subsampling, batch clipping: the Hoeffding sandwich at effective epoch
  count qE with q = (N/s)(1 - C(N-g, s)/C(N, s)) ~ g;
* shuffling, g = 1: exactly G_{sqrt(E)/sigma} (tight);
* shuffling, batch clipping, g <= s: the exact per-epoch occupancy
  mixture convolved over E epochs, sandwiched between G_{sqrt(gE)/sigma}
  and the convexified upper bound built from the per-epoch tail mass
  u1 = g^2/(N/s - g - g^2) composed as 1 - (1 - u1)^E;
* shuffling, other clippings, g >= 2: lower bound G_{sqrt(gE)/sigma}
  shifted by the accumulated separation-failure mass E g^2 m s/(N - g).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curves import (
    DivergenceSummary,
    EpsDelta,
    TradeoffCurve,
    default_alphas,
    delta_of_epsilon,
    gdp_to_divergences,
    group_iterate,
)
from .mixture import (
    MixtureSpec,
    TailParams,
    lower_bound_curve,
    mixture_curve,
    upper_bound_curve,
)
from .sampling import (
    SamplerConfig,
    bc_ss_q1,
    epoch_convolve,
    hoeffding_tails,
    qdist_bc_shuffling,
    shuffling_tail_params,
)

__all__ = [
    "AnalyzeOptions",
    "GuaranteeBundle",
    "UnsupportedConfigError",
    "analyze",
    "headline_mu",
    "compare_group_paths",
    "sup_distance",
    "DEFAULT_EPS_GRID",
]

DEFAULT_EPS_GRID = (0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)


class UnsupportedConfigError(ValueError):
    """No analyzed guarantee for this strategy/clipping/group combination."""


@dataclass(frozen=True)
class AnalyzeOptions:
    gamma: float | None = None  # defaults to 1/g in the IC lower bound
    eps_grid: tuple = DEFAULT_EPS_GRID
    grid_size: int = 4097
    omega: float = 2.0


@dataclass(frozen=True)
class GuaranteeBundle:
    config: SamplerConfig
    sigma: float
    row: str
    exact_f: TradeoffCurve | None
    lower: TradeoffCurve
    upper: TradeoffCurve | None
    approx_mu: float
    eps_delta_samples: tuple
    divergences: DivergenceSummary
    lower_tail: TailParams | None = None
    upper_tail: TailParams | None = None

    def to_json_dict(self) -> dict:
        import json

        def curve_obj(c):
            return None if c is None else json.loads(c.to_json())

        return {
            "config": {
                "N": self.config.N,
                "s": self.config.s,
                "m": self.config.m,
                "E": self.config.E,
                "g": self.config.g,
                "strategy": self.config.strategy,
                "clipping": self.config.clipping,
            },
            "sigma": self.sigma,
            "row": self.row,
            "approx_mu": self.approx_mu,
            "exact_f": curve_obj(self.exact_f),
            "lower": curve_obj(self.lower),
            "upper": curve_obj(self.upper),
            "eps_delta": [[e.epsilon, e.delta] for e in self.eps_delta_samples],
            "divergences": {
                "rdp_order": self.divergences.rdp_order,
                "rdp_eps": self.divergences.rdp_eps,
                "zcdp_rho": self.divergences.zcdp_rho,
                "tcdp_rho": self.divergences.tcdp_rho,
                "tcdp_omega": self.divergences.tcdp_omega,
            },
        }

    def to_csv(self, n: int = 513) -> str:
        a = default_alphas(n)
        lower = self.lower(a)
        exact = self.exact_f(a) if self.exact_f is not None else None
        upper = self.upper(a) if self.upper is not None else None
        lines = ["alpha,lower,exact,upper"]
        for i, x in enumerate(a):
            ex = f"{exact[i]:.12g}" if exact is not None else ""
            up = f"{upper[i]:.12g}" if upper is not None else ""
            lines.append(f"{x:.12g},{lower[i]:.12g},{ex},{up}")
        return "\n".join(lines) + "\n"


def headline_mu(config: SamplerConfig, sigma: float, gamma: float | None = None) -> float:
    """Headline Gaussian parameter of the matched guarantee row.

    sqrt(gE)/sigma for batch-clipping and shuffling rows; for individual
    clipping with subsampling at g >= 2 the lower-bound scale
    sqrt((e + gamma) * min(m, g) * g * E)/sigma with gamma defaulting to 1/g.
    """
    if config.strategy == "SS" and config.clipping == "IC" and config.g >= 2:
        if gamma is None:
            gamma = 1.0 / config.g
        return (
            math.sqrt((math.e + gamma) * min(config.m, config.g) * config.g * config.E)
            / sigma
        )
    return math.sqrt(config.g * config.E) / sigma


def _eps_delta(curve: TradeoffCurve, eps_grid) -> tuple:
    return tuple(EpsDelta(e, delta_of_epsilon(curve, e)) for e in eps_grid)


def _finish(config, sigma, row, exact_f, lower, upper, opts, lower_tail=None, upper_tail=None):
    mu = headline_mu(config, sigma, opts.gamma)
    guarantee = exact_f if exact_f is not None else lower
    return GuaranteeBundle(
        config=config,
        sigma=sigma,
        row=row,
        exact_f=exact_f,
        lower=lower,
        upper=upper,
        approx_mu=mu,
        eps_delta_samples=_eps_delta(guarantee, opts.eps_grid),
        divergences=gdp_to_divergences(mu, opts.omega),
        lower_tail=lower_tail,
        upper_tail=upper_tail,
    )


def _hoeffding_bundle(config, sigma, E_eff, row, opts):
    tails = hoeffding_tails(E_eff)
    lower = lower_bound_curve(tails.lower, sigma, opts.grid_size)
    upper = None
    if tails.upper is not None:
        upper = upper_bound_curve(tails.upper, sigma, opts.grid_size)
    return _finish(
        config, sigma, row, None, lower, upper, opts,
        lower_tail=tails.lower, upper_tail=tails.upper,
    )


def analyze(
    config: SamplerConfig, sigma: float, options: AnalyzeOptions | None = None
) -> GuaranteeBundle:
    """Compute the guarantee bundle for one sampler configuration."""
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    opts = options or AnalyzeOptions()
    N, s, m, E, g = config.N, config.s, config.m, config.E, config.g

    if config.strategy == "SS":
        if config.clipping == "BC":
            q1 = bc_ss_q1(N, s, g)
            return _hoeffding_bundle(
                config, sigma, (N / s) * E * q1, "subsampling/batch-clipping", opts
            )
        if g == 1:
            return _hoeffding_bundle(
                config, sigma, float(E), "subsampling g=1 sandwich", opts
            )
        if config.clipping == "IC":
            gamma = opts.gamma if opts.gamma is not None else 1.0 / g
            if N <= g + m:
                raise UnsupportedConfigError(
                    "individual-clipping subsampling bound needs N > g + m"
                )
            beta = math.exp(N / (N - g - m)) + gamma
            c_low = math.sqrt(beta * min(m, g) * g * E)
            tail = TailParams("lower", c_low, min(math.exp(-gamma * g * E), 1.0))
            lower = lower_bound_curve(tail, sigma, opts.grid_size)
            return _finish(
                config, sigma, "subsampling/individual-clipping group", None,
                lower, None, opts, lower_tail=tail,
            )
        raise UnsupportedConfigError(
            "general clipping with subsampling is only analyzed for g = 1 "
            "(no such row in the guarantee table)"
        )

    # shuffling
    if g == 1:
        exact = TradeoffCurve.gaussian(math.sqrt(E) / sigma)
        return _finish(
            config, sigma, "shuffling g=1 (tight)", exact, exact, exact, opts
        )
    if config.clipping == "BC":
        lower = TradeoffCurve.gaussian(math.sqrt(g * E) / sigma)
        exact_curve = None
        upper = None
        upper_tail = None
        if g <= s:
            per_epoch = qdist_bc_shuffling(N, s, g)
            total = epoch_convolve(per_epoch, E)
            spec = MixtureSpec.from_c2_probs(total.as_dict(), sigma)
            exact_curve = mixture_curve(spec, opts.grid_size)
            M = N // s
            if M > g + g * g:
                u1 = g * g / (M - g - g * g)
                u_total = 1.0 - (1.0 - u1) ** E
                upper_tail = TailParams("upper", math.sqrt(g * E), u_total)
                upper = upper_bound_curve(upper_tail, sigma, opts.grid_size)
        return _finish(
            config, sigma, "shuffling/batch-clipping group", exact_curve,
            lower, upper, opts, upper_tail=upper_tail,
        )
    # IC or GEN with shuffling, g >= 2: composed separation lower bound
    lower1, _ = shuffling_tail_params(N, m, s, g)
    tail = TailParams("lower", math.sqrt(g * E), min(E * lower1.mass, 1.0))
    lower = lower_bound_curve(tail, sigma, opts.grid_size)
    return _finish(
        config, sigma, "shuffling/general-clipping group", None, lower, None,
        opts, lower_tail=tail,
    )


def sup_distance(a: TradeoffCurve, b: TradeoffCurve, n: int = 4097) -> float:
    grid = default_alphas(n)
    return float(np.max(np.abs(a(grid) - b(grid))))


def compare_group_paths(config: SamplerConfig, sigma: float, n: int = 4097) -> dict:
    """Direct sqrt(g) group analysis vs iterated g=1 group transform.

    The direct shuffling/batch-clipping guarantee G_{sqrt(gE)/sigma}
    dominates (sits closer to 1 - alpha than) the g-fold iterate of the
    g=1 guarantee, which lands at G_{g sqrt(E)/sigma}.
    """
    g, E = config.g, config.E
    direct_mu = math.sqrt(g * E) / sigma
    base_mu = math.sqrt(E) / sigma
    direct = TradeoffCurve.gaussian(direct_mu)
    iterated = group_iterate(TradeoffCurve.gaussian(base_mu), g, n)
    grid = default_alphas(n)
    gap = direct(grid) - iterated(grid)
    dominates = bool(np.all(gap >= -1e-9))
    if config.strategy == "SH" and config.clipping == "BC" and not dominates:
        raise AssertionError("direct group bound failed to dominate the iterate")
    return {
        "direct_mu": direct_mu,
        "iterated_mu": g * base_mu,
        "direct": direct,
        "iterated": iterated,
        "dominates": dominates,
        "min_gap": float(np.min(gap)),
        "max_gap": float(np.max(gap)),
    }
