"""Standard normal and shifted chi-square primitives.

Scalar entry points validate their inputs; the underscore-prefixed array
helpers accept +/-inf endpoints and are used by the vectorised law code.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

SQRT_2PI = math.sqrt(2.0 * math.pi)
TAIL_CUT = 12.0


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"non-finite argument: {v!r}")


def std_normal_cdf(x: float) -> float:
    """Phi0(x), the N(0, 1) distribution function."""
    _check_finite(x)
    return float(ndtr(x))


def std_normal_pdf(x: float) -> float:
    _check_finite(x)
    return math.exp(-0.5 * x * x) / SQRT_2PI


def _pdf(t: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * np.square(t)) / SQRT_2PI


def normal_tail_moments(t: np.ndarray, kmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper truncated moments of Z ~ N(0, 1).

    Returns arrays ``lower[k] = E[Z^k 1{Z <= t}]`` and
    ``upper[k] = E[Z^k 1{Z > t}]`` for k = 0..kmax.  Both tails are computed
    from Phi0(-|t|) so that neither loses relative accuracy far from 0.
    """
    t = np.asarray(t, dtype=float)
    small = ndtr(-np.abs(t))
    neg = t < 0
    cdf = np.where(neg, small, 1.0 - small)
    sf = np.where(neg, 1.0 - small, small)
    finite = np.isfinite(t)
    tt = np.where(finite, t, 0.0)
    phi = np.where(finite, _pdf(tt), 0.0)

    lower = np.empty((kmax + 1,) + t.shape)
    upper = np.empty_like(lower)
    lower[0], upper[0] = cdf, sf
    if kmax >= 1:
        lower[1], upper[1] = -phi, phi
    power = phi  # t^(k-1) * phi(t), built up incrementally
    for k in range(2, kmax + 1):
        power = power * tt
        lower[k] = (k - 1) * lower[k - 2] - power
        upper[k] = (k - 1) * upper[k - 2] + power
    return lower, upper


def interval_moments(lo_lower, lo_upper, hi_lower, hi_upper, lo) -> np.ndarray:
    """E[Z^k 1{lo < Z <= hi}] from precomputed tail moments at both ends.

    Uses the upper tails when the interval sits to the right of 0 and the
    lower tails otherwise, which keeps far-tail cells accurate.
    """
    right = np.asarray(lo) >= 0
    return np.where(right, lo_upper - hi_upper, hi_lower - lo_lower)


def consecutive_interval_moments(t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """J_k = E[Z^k 1{t_j < Z <= t_{j+1}}], k = 0, 1, 2, along the last axis.

    Lean version of `interval_moments` for sorted edges; each tail mass is
    taken from Phi0(-|t|) so far-tail cells keep their relative accuracy.
    """
    t = np.asarray(t, dtype=float)
    # beyond |t| = TAIL_CUT both tail masses are below 1e-32 and are dropped;
    # the cut keeps every row telescoping to exactly one
    near = np.abs(t) < TAIL_CUT
    tn = t[near]
    small = np.zeros(t.shape)
    small[near] = ndtr(-np.abs(tn))
    phi = np.zeros(t.shape)
    phi[near] = np.exp(-0.5 * tn * tn) * (1.0 / SQRT_2PI)
    tt = np.where(near, t, 0.0)
    lo, hi = t[..., :-1], t[..., 1:]
    s_lo, s_hi = small[..., :-1], small[..., 1:]
    right = lo >= 0
    left = hi <= 0
    J0 = np.where(right, s_lo - s_hi, np.where(left, s_hi - s_lo, 1.0 - s_lo - s_hi))
    tphi = tt * phi
    J1 = phi[..., :-1] - phi[..., 1:]
    J2 = J0 + tphi[..., :-1] - tphi[..., 1:]
    return J0, J1, J2


def gaussian_partial_first_moment(mean: float, std: float, a: float, b: float) -> float:
    """E[Y 1{a < Y <= b}] for Y ~ N(mean, std^2); a and b may be infinite."""
    if math.isnan(a) or math.isnan(b) or not math.isfinite(mean) or not math.isfinite(std):
        raise ValueError("non-finite mean/std or NaN endpoint")
    if a > b:
        raise ValueError(f"empty interval: a={a} > b={b}")
    if std < 0:
        raise ValueError("std must be nonnegative")
    if std == 0.0:
        return mean if a < mean <= b else 0.0
    ends = np.array([(a - mean) / std, (b - mean) / std])
    lower, upper = normal_tail_moments(ends, 1)
    j = interval_moments(lower[:, 0], upper[:, 0], lower[:, 1], upper[:, 1], ends[0])
    return float(mean * j[0] + std * j[1])


def _chi2_window(c: float, y: float, kmax: int) -> np.ndarray:
    # moments of W = Z + c over {W^2 <= y}, i.e. Z in [-sqrt(y) - c, sqrt(y) - c]
    r = math.sqrt(y)
    ends = np.array([-r - c, r - c])
    lower, upper = normal_tail_moments(ends, kmax)
    j = interval_moments(lower[:, 0], upper[:, 0], lower[:, 1], upper[:, 1], ends[0])
    # expand E[(Z + c)^k 1{...}] binomially
    out = np.zeros(kmax + 1)
    for k in range(kmax + 1):
        out[k] = sum(math.comb(k, i) * c ** (k - i) * j[i] for i in range(k + 1))
    return out


def shifted_chi2_cdf(c: float, y: float) -> float:
    """P((Z + c)^2 <= y)."""
    if math.isnan(c) or math.isnan(y) or math.isinf(c):
        raise ValueError("non-finite argument")
    if y <= 0:
        return 0.0
    if math.isinf(y):
        return 1.0
    return float(_chi2_window(c, y, 0)[0])


def shifted_chi2_partial_first_moment(c: float, y: float) -> float:
    """E[(Z + c)^2 1{(Z + c)^2 <= y}]."""
    if math.isnan(c) or math.isnan(y) or math.isinf(c):
        raise ValueError("non-finite argument")
    if y <= 0:
        return 0.0
    if math.isinf(y):
        return 1.0 + c * c
    return float(_chi2_window(c, y, 2)[2])
