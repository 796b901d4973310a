"""Trade-off function algebra.

A trade-off curve maps a Type-I error level alpha in [0, 1] to the
optimal Type-II error beta of the corresponding hypothesis test.  Valid
curves are convex, non-increasing and bounded by 0 <= f(alpha) <= 1 - alpha.
Two representations are supported: the analytic Gaussian family
G_mu(alpha) = Phi(Phi^-1(1 - alpha) - mu), and piecewise-linear grids.

The operators here are the standard f-DP toolbox: functional inverse,
convexification (lower convex hull), the p-subsampling operator,
Gaussian composition, group privacy by functional iteration, and
conversions to (epsilon, delta) and divergence-based DP summaries.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ._normal import gauss_beta_vec, phi, phi_vec

__all__ = [
    "TradeoffCurve",
    "EpsDelta",
    "DivergenceSummary",
    "DEFAULT_GRID_SIZE",
    "default_alphas",
    "gaussian_eval",
    "curve_inverse",
    "convexify",
    "subsample_operator",
    "compose_gaussians",
    "group_iterate",
    "delta_of_epsilon",
    "f_eps_delta_curve",
    "gdp_to_divergences",
    "curve_to_csv",
]

DEFAULT_GRID_SIZE = 4097

_GRID_TOL = 1e-6


def default_alphas(n: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


@dataclass(frozen=True)
class EpsDelta:
    epsilon: float
    delta: float

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be nonnegative")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")


@dataclass(frozen=True)
class DivergenceSummary:
    """Renyi / zCDP / tCDP summaries derived from one Gaussian parameter."""

    rdp_order: float
    rdp_eps: float
    zcdp_rho: float
    tcdp_rho: float
    tcdp_omega: float


class TradeoffCurve:
    """Immutable trade-off curve, either analytic Gaussian or a grid.

    Grid curves interpolate linearly between ascending alpha nodes.
    Construction validates range, monotonicity and the f(alpha) <= 1 - alpha
    cap up to a small tolerance (violations below it are snapped, larger
    ones raise).  Convexity is a semantic invariant of every curve the
    library produces but is deliberately not enforced here so that raw
    point sets can be fed to :func:`convexify`.
    """

    __slots__ = ("kind", "mu", "alphas", "betas", "symmetric")

    def __init__(self, kind, mu=None, alphas=None, betas=None, symmetric=False):
        if kind == "gaussian":
            if mu is None or mu < 0.0:
                raise ValueError("gaussian curve requires mu >= 0")
            self.kind = "gaussian"
            self.mu = float(mu)
            self.alphas = None
            self.betas = None
            self.symmetric = True
        elif kind == "grid":
            a = np.asarray(alphas, dtype=np.float64)
            b = np.asarray(betas, dtype=np.float64)
            if a.ndim != 1 or a.shape != b.shape or a.size < 2:
                raise ValueError("grid curve needs matching 1-d alpha/beta arrays")
            if a[0] != 0.0 or a[-1] != 1.0 or np.any(np.diff(a) < 0.0):
                raise ValueError("alphas must ascend from 0 to 1")
            if np.any(b < -_GRID_TOL) or np.any(b > 1.0 + _GRID_TOL):
                raise ValueError("betas must lie in [0, 1]")
            if np.any(np.diff(b) > _GRID_TOL):
                raise ValueError("betas must be non-increasing")
            if np.any(b - (1.0 - a) > _GRID_TOL):
                raise ValueError("trade-off curve must satisfy beta <= 1 - alpha")
            b = np.minimum(np.minimum.accumulate(np.clip(b, 0.0, 1.0)), 1.0 - a)
            self.kind = "grid"
            self.mu = None
            self.alphas = a
            self.betas = b
            self.symmetric = bool(symmetric)
        else:
            raise ValueError(f"unknown curve kind {kind!r}")

    @classmethod
    def gaussian(cls, mu: float) -> "TradeoffCurve":
        return cls("gaussian", mu=mu)

    @classmethod
    def grid(cls, alphas, betas, symmetric: bool = False) -> "TradeoffCurve":
        return cls("grid", alphas=alphas, betas=betas, symmetric=symmetric)

    def __call__(self, alpha):
        """Evaluate the curve; accepts scalars or arrays."""
        scalar = np.isscalar(alpha)
        a = np.atleast_1d(np.asarray(alpha, dtype=np.float64))
        if self.kind == "gaussian":
            out = gauss_beta_vec(self.mu, a)
        else:
            out = np.interp(np.clip(a, 0.0, 1.0), self.alphas, self.betas)
        return float(out[0]) if scalar else out

    def sample(self, n: int = DEFAULT_GRID_SIZE) -> "TradeoffCurve":
        """Grid representation of this curve on a uniform n-point grid."""
        a = default_alphas(n)
        return TradeoffCurve.grid(a, self(a), symmetric=self.symmetric)

    def check_convexity(self, tol: float = _GRID_TOL) -> float:
        """Most negative slope increment; >= -tol for a convex curve."""
        if self.kind == "gaussian":
            return 0.0
        da = np.diff(self.alphas)
        keep = da > 0
        slopes = np.diff(self.betas)[keep] / da[keep]
        if slopes.size < 2:
            return 0.0
        worst = float(np.min(np.diff(slopes)))
        if worst < -tol:
            raise ValueError(f"curve is not convex (worst slope drop {worst:.3e})")
        return min(worst, 0.0)

    def to_json(self) -> str:
        if self.kind == "gaussian":
            return json.dumps({"kind": "gaussian", "mu": self.mu})
        return json.dumps(
            {
                "kind": "grid",
                "alphas": self.alphas.tolist(),
                "betas": self.betas.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "TradeoffCurve":
        obj = json.loads(text)
        if obj["kind"] == "gaussian":
            return cls.gaussian(obj["mu"])
        return cls.grid(obj["alphas"], obj["betas"])

    def __repr__(self):
        if self.kind == "gaussian":
            return f"TradeoffCurve.gaussian(mu={self.mu:.6g})"
        return f"TradeoffCurve.grid(<{self.alphas.size} points>)"


def gaussian_eval(mu: float, alpha: float) -> float:
    """G_mu(alpha) = Phi(Phi^-1(1 - alpha) - mu) with exact endpoints."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if mu < 0.0:
        raise ValueError("mu must be nonnegative")
    if alpha == 0.0:
        return 1.0
    if alpha == 1.0:
        return 0.0
    return float(gauss_beta_vec(mu, alpha))


def _inverse_breakpoints(alphas: np.ndarray, betas: np.ndarray):
    """Breakpoints of h^-1(a) = inf{t : h(t) <= a} for piecewise-linear h."""
    xs = betas[::-1]
    ys = alphas[::-1]
    # flat segments of h: keep the smallest t for each beta value
    keep = np.ones(xs.size, dtype=bool)
    keep[:-1] = xs[1:] > xs[:-1]
    xs, ys = xs[keep], ys[keep]
    pts_x = [0.0] if xs[0] > 0.0 else []
    pts_y = [1.0] if xs[0] > 0.0 else []
    if pts_x and xs[0] > 1e-12:
        # h never reaches values below min(beta): inverse jumps from 1
        pts_x.append(xs[0] - 1e-12)
        pts_y.append(1.0)
    pts_x.extend(xs.tolist())
    pts_y.extend(ys.tolist())
    if pts_x[-1] < 1.0:
        pts_x.append(1.0)
        pts_y.append(pts_y[-1] if pts_y[-1] == 0.0 else 0.0)
    return np.asarray(pts_x), np.asarray(pts_y)


def curve_inverse(f: TradeoffCurve) -> TradeoffCurve:
    """Functional inverse h^-1(a) = inf{t in [0,1] : h(t) <= a}.

    Gaussian curves are their own inverse.
    """
    if f.kind == "gaussian":
        return f
    xs, ys = _inverse_breakpoints(f.alphas, f.betas)
    if xs[0] > 0.0:
        xs = np.concatenate(([0.0], xs))
        ys = np.concatenate(([1.0], ys))
    return TradeoffCurve.grid(xs, ys, symmetric=f.symmetric)


def _lower_hull(xs: np.ndarray, ys: np.ndarray):
    """Lower convex hull of points sorted by ascending x (monotone chain)."""
    hx, hy = [], []
    for x, y in zip(xs, ys):
        while len(hx) >= 2:
            cross = (hx[-1] - hx[-2]) * (y - hy[-2]) - (hy[-1] - hy[-2]) * (x - hx[-2])
            if cross <= 0.0:
                hx.pop()
                hy.pop()
            else:
                break
        if hx and x == hx[-1]:
            if y >= hy[-1]:
                continue
            hx.pop()
            hy.pop()
        hx.append(x)
        hy.append(y)
    return np.asarray(hx), np.asarray(hy)


def convexify(curve_or_points, betas=None) -> TradeoffCurve:
    """Greatest convex minorant (lower hull) of grid points; idempotent.

    Accepts a grid TradeoffCurve or raw (alphas, betas) arrays, so that
    point sets outside the trade-off invariants can still be hulled.
    """
    if isinstance(curve_or_points, TradeoffCurve):
        if curve_or_points.kind != "grid":
            raise ValueError("convexify expects a grid curve or point arrays")
        xs, ys = curve_or_points.alphas, curve_or_points.betas
        symmetric = curve_or_points.symmetric
    else:
        xs = np.asarray(curve_or_points, dtype=np.float64)
        ys = np.asarray(betas, dtype=np.float64)
        symmetric = False
    hx, hy = _lower_hull(xs, ys)
    return TradeoffCurve.grid(xs, np.interp(xs, hx, hy), symmetric=symmetric)


def subsample_operator(
    f: TradeoffCurve, p: float, n: int = DEFAULT_GRID_SIZE
) -> TradeoffCurve:
    """p-sampling operator: convexified min of f_p and its inverse.

    f_p(alpha) = p*f(alpha) + (1-p)*(1-alpha); the operator symmetrizes
    (min with the functional inverse) and takes the lower hull.  The
    result is a symmetric trade-off curve.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if p == 0.0:
        return TradeoffCurve.gaussian(0.0)
    if p == 1.0 and f.symmetric:
        return f
    a = default_alphas(n)
    fp = p * f(a) + (1.0 - p) * (1.0 - a)
    inv_x, inv_y = _inverse_breakpoints(a, fp)
    fp_inv = np.interp(a, inv_x, inv_y)
    m = np.minimum(fp, fp_inv)
    out = convexify(a, m)
    return TradeoffCurve.grid(out.alphas, out.betas, symmetric=True)


def compose_gaussians(mus) -> float:
    """Composition of Gaussian curves: G_mu1 (x) ... (x) G_muk = G_sqrt(sum mu^2)."""
    mus = np.asarray(list(mus), dtype=np.float64)
    if np.any(mus < 0.0):
        raise ValueError("mu values must be nonnegative")
    return float(math.sqrt(float(np.sum(mus * mus))))


def group_iterate(f: TradeoffCurve, g: int, n: int = DEFAULT_GRID_SIZE) -> TradeoffCurve:
    """Group-privacy transform 1 - (1-f)^(compose g) by functional iteration.

    Each node of the output grid carries g exact evaluations of f, so for
    f = G_mu the node values reproduce G_{g*mu} to floating-point accuracy.
    """
    if g < 1 or int(g) != g:
        raise ValueError("group size must be a positive integer")
    a = default_alphas(n)
    w = a.copy()
    for _ in range(int(g)):
        w = 1.0 - f(w)
    return TradeoffCurve.grid(a, 1.0 - w, symmetric=f.symmetric)


def delta_of_epsilon(f: TradeoffCurve, epsilon: float) -> float:
    """Smallest delta such that the curve dominates f_{epsilon,delta}.

    Gaussian curves use the closed form
    delta(eps) = Phi(-eps/mu + mu/2) - e^eps * Phi(-eps/mu - mu/2);
    grid curves use the supporting-line form
    sup_alpha (1 - f(alpha) - e^eps * alpha), clamped to [0, 1].
    """
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    if f.kind == "gaussian":
        mu = f.mu
        if mu == 0.0:
            return 0.0
        d = phi(-epsilon / mu + 0.5 * mu) - math.exp(epsilon) * phi(
            -epsilon / mu - 0.5 * mu
        )
        return float(min(max(d, 0.0), 1.0))
    vals = 1.0 - f.betas - math.exp(epsilon) * f.alphas
    return float(min(max(float(np.max(vals)), 0.0), 1.0))


def f_eps_delta_curve(epsilon: float, delta: float) -> TradeoffCurve:
    """Trade-off curve of an (epsilon, delta)-DP guarantee.

    f_{eps,delta}(alpha) = max{0, 1 - delta - e^eps * alpha,
    (1 - delta - alpha) e^-eps}.  The three branches are supporting
    lines, so the pointwise max is the correct reading (a trade-off
    function is nonnegative).
    """
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    one = 1.0 - delta
    if one <= 0.0:
        return TradeoffCurve.grid([0.0, 1.0], [0.0, 0.0])
    e = math.exp(epsilon)
    if epsilon == 0.0:
        knots = sorted({0.0, one, 1.0})
    else:
        cross = one * (1.0 - 1.0 / e) / (e - 1.0 / e)
        knots = sorted({0.0, cross, min(one, 1.0), 1.0})
    a = np.asarray(knots)
    b = np.maximum.reduce([np.zeros_like(a), one - e * a, (one - a) / e])
    return TradeoffCurve.grid(a, b)


def gdp_to_divergences(mu: float, omega: float) -> DivergenceSummary:
    """Divergence-based DP implied by a G_mu guarantee.

    G_mu-DP implies (omega, mu^2*omega/2)-RDP for every omega > 1, hence
    mu^2/2-zCDP and (mu^2*omega/2, omega)-tCDP.
    """
    if mu < 0.0:
        raise ValueError("mu must be nonnegative")
    if omega <= 1.0:
        raise ValueError("omega must exceed 1")
    half_mu2 = 0.5 * mu * mu
    return DivergenceSummary(
        rdp_order=float(omega),
        rdp_eps=half_mu2 * omega,
        zcdp_rho=half_mu2,
        tcdp_rho=half_mu2 * omega,
        tcdp_omega=float(omega),
    )


def curve_to_csv(f: TradeoffCurve, n: int = DEFAULT_GRID_SIZE) -> str:
    """CSV export with header "alpha,beta"."""
    if f.kind == "grid":
        a, b = f.alphas, f.betas
    else:
        a = default_alphas(n)
        b = f(a)
    lines = ["alpha,beta"]
    lines.extend(f"{x:.12g},{y:.12g}" for x, y in zip(a, b))
    return "\n".join(lines) + "\n"
