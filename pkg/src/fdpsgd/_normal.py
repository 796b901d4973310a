"""Standard normal CDF and its inverse, via error-function identities.

Phi(x) = erfc(-x/sqrt(2))/2 keeps full relative precision in the left
tail.  Phi_inv is computed by bracketed bisection on Phi followed by a
few safeguarded Newton steps (no statistical tables, no scipy.ndtri in
the implementation; scipy is only used as a test oracle).  Scalar
variants are numba-compatible; *_vec variants are vectorized numpy.
"""

import math

import numpy as np
from scipy.special import erfc as _erfc_vec

from ._backend import maybe_njit

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

_BISECT_STEPS = 24
_NEWTON_STEPS = 8


@maybe_njit
def phi(x: float) -> float:
    """Standard normal CDF."""
    return 0.5 * math.erfc(-x / SQRT2)


@maybe_njit
def _phi_inv_left(p: float) -> float:
    # inverse CDF for p in (0, 0.5]; bracket [-40, 0] covers p >= 5e-316
    lo, hi = -40.0, 0.0
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        if phi(mid) < p:
            lo = mid
        else:
            hi = mid
    z = 0.5 * (lo + hi)
    # safeguarded Newton: keep shrinking the bracket, fall back to bisection
    for _ in range(_NEWTON_STEPS):
        f = phi(z) - p
        if f == 0.0:
            return z
        if f < 0.0:
            lo = z
        else:
            hi = z
        pdf = INV_SQRT_2PI * math.exp(-0.5 * z * z)
        z_new = z - f / pdf if pdf > 0.0 else 0.5 * (lo + hi)
        if z_new <= lo or z_new >= hi:
            z_new = 0.5 * (lo + hi)
        z = z_new
    return z


@maybe_njit
def phi_inv(p: float) -> float:
    """Inverse standard normal CDF on (0, 1); returns +/-inf at the endpoints."""
    if p <= 0.0:
        return -math.inf
    if p >= 1.0:
        return math.inf
    if p > 0.5:
        return -_phi_inv_left(1.0 - p)
    return _phi_inv_left(p)


@maybe_njit
def gauss_beta(mu: float, alpha: float) -> float:
    """Gaussian trade-off value Phi(Phi^-1(1-alpha) - mu), endpoints exact."""
    if alpha <= 0.0:
        return 1.0
    if alpha >= 1.0:
        return 0.0
    return phi(-phi_inv(alpha) - mu)


@maybe_njit
def gauss_slope(mu: float, alpha: float) -> float:
    """Derivative of the Gaussian trade-off curve, -exp(mu*Phi^-1(1-alpha) - mu^2/2)."""
    return -math.exp(-mu * phi_inv(alpha) - 0.5 * mu * mu)


def phi_vec(x):
    return 0.5 * _erfc_vec(-np.asarray(x, dtype=np.float64) / SQRT2)


def phi_inv_vec(p):
    p = np.asarray(p, dtype=np.float64)
    out = np.empty_like(p)
    out[p <= 0.0] = -np.inf
    out[p >= 1.0] = np.inf
    interior = (p > 0.0) & (p < 1.0)
    q = p[interior]
    flip = q > 0.5
    q = np.where(flip, 1.0 - q, q)

    lo = np.full_like(q, -40.0)
    hi = np.zeros_like(q)
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        below = phi_vec(mid) < q
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    z = 0.5 * (lo + hi)
    for _ in range(_NEWTON_STEPS):
        pdf = INV_SQRT_2PI * np.exp(-0.5 * z * z)
        z_new = z - (phi_vec(z) - q) / np.maximum(pdf, 1e-300)
        z = np.where((z_new < lo) | (z_new > hi), 0.5 * (lo + hi), z_new)

    out[interior] = np.where(flip, -z, z)
    return out


def gauss_beta_vec(mu: float, alpha):
    alpha = np.asarray(alpha, dtype=np.float64)
    out = phi_vec(-phi_inv_vec(alpha) - mu)
    out = np.where(alpha <= 0.0, 1.0, out)
    out = np.where(alpha >= 1.0, 0.0, out)
    return out
