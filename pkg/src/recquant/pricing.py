"""Put pricing in the Merton jump-diffusion model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .engine import QuantizedChain
from .jumps import lognormal_jumps
from .schemes import Affine, SchemeSpec


@dataclass(frozen=True)
class PutSpec:
    strike: float
    rate: float
    maturity: float
    spot: float

    def __post_init__(self):
        if not (self.strike > 0 and self.maturity > 0 and self.spot > 0):
            raise ValueError("strike, maturity and spot must be positive")


@dataclass(frozen=True)
class MertonModel:
    """dX = r X dt + sigma X dW + X- dJ with lognormal jump factors e^xi, xi ~ N(0, theta^2)."""

    sigma: float
    intensity: float
    jump_vol: float

    @property
    def mean_jump(self) -> float:
        return math.expm1(0.5 * self.jump_vol ** 2)


def bs_put(x: float, sigma: float, r: float, tau: float, K: float, return_flag: bool = False):
    """Black-Scholes put; degenerate sigma or tau gives the discounted intrinsic value."""
    if sigma <= 0 or tau <= 0:
        tau_ = max(tau, 0.0)
        price = max(K * math.exp(-r * tau_) - x, 0.0)
        return (price, True) if return_flag else price
    sq = sigma * math.sqrt(tau)
    d1 = (math.log(x / K) + (r + 0.5 * sigma * sigma) * tau) / sq
    d2 = d1 - sq
    price = -x * float(ndtr(-d1)) + math.exp(-r * tau) * K * float(ndtr(-d2))
    return (price, False) if return_flag else price


def bs_call(x: float, sigma: float, r: float, tau: float, K: float) -> float:
    sq = sigma * math.sqrt(tau)
    d1 = (math.log(x / K) + (r + 0.5 * sigma * sigma) * tau) / sq
    return x * float(ndtr(d1)) - math.exp(-r * tau) * K * float(ndtr(d1 - sq))


def equivalent_bs_vol(sigma: float, intensity: float, jump_vol: float) -> float:
    if sigma < 0 or intensity < 0 or jump_vol < 0:
        raise ValueError("inputs must be nonnegative")
    return math.sqrt(sigma * sigma + intensity * jump_vol * jump_vol)


def merton_put_closed_form(model: MertonModel, put: PutSpec, tail_tol: float = 1e-14,
                           outer_discount: bool = False) -> float:
    """Poisson-weighted series of Black-Scholes puts.

    Term k uses spot x0 exp(k theta^2 / 2 - lambda T E[U]) and volatility
    sqrt(sigma^2 + k theta^2 / T).  The series stops once the Poisson weight
    falls below tail_tol (after passing the mode).  With outer_discount the
    sum is multiplied once more by exp(-r T); this variant is kept to
    compare against published tables that were computed that way.
    """
    lam, th, T = model.intensity, model.jump_vol, put.maturity
    lt = lam * T
    eu = model.mean_jump
    total = []
    k = 0
    while True:
        logw = -lt + (k * math.log(lt) if lt > 0 else 0.0) - math.lgamma(k + 1)
        w = math.exp(logw) if lt > 0 or k == 0 else 0.0
        spot = put.spot * math.exp(0.5 * k * th * th - lt * eu)
        vol = math.sqrt(model.sigma ** 2 + k * th * th / T)
        total.append(w * bs_put(spot, vol, put.rate, T, put.strike))
        if lt == 0 or (k > lt and w < tail_tol):
            break
        k += 1
    price = math.fsum(total)
    if outer_discount:
        price *= math.exp(-put.rate * T)
    return price


def merton_scheme(model: MertonModel, put: PutSpec, n: int, nu_level: int = 50,
                  jump_mode: str = "short") -> SchemeSpec:
    """Jump Euler scheme of the Merton dynamics with quantized jump sizes."""
    return SchemeSpec(
        kind="jump_euler",
        drift=Affine(0.0, put.rate),
        diffusion=Affine(0.0, model.sigma),
        x0=put.spot,
        T=put.maturity,
        n=n,
        jump_coef=Affine(0.0, 1.0),
        intensity=model.intensity,
        jump_law=lognormal_jumps(model.jump_vol),
        jump_mode=jump_mode,
        nu_level=nu_level,
    )


def quantized_expectation(chain: QuantizedChain, payoff, discount: float = 1.0) -> float:
    """discount * sum_i payoff(x_n^i) p_n^i."""
    x, p = chain.terminal
    vals = np.asarray(payoff(x), dtype=float) * p
    return discount * math.fsum(np.broadcast_to(vals, p.shape))


def quantized_put(chain: QuantizedChain, put: PutSpec) -> float:
    disc = math.exp(-put.rate * put.maturity)
    return quantized_expectation(chain, lambda x: np.maximum(put.strike - x, 0.0), disc)
