"""Discretisation schemes and their one-step laws.

Each scheme maps (x, Z) to a quadratic polynomial in Z, possibly mixed over
the number and sizes of jumps, so its conditional law given x is a
QuadraticGaussianMixture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .jumps import (JumpSizeLaw, jump_count_weights, jump_sum_laws, parse_jump_mode,
                    quantize_jump_law)
from .laws import QuadraticGaussianMixture

KINDS = ("euler", "milstein", "taylor20", "jump_euler")

Coef = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Affine:
    """Coefficient c0 + c1 * x, usable as b(t, x), sigma(t, x) or gamma(x)."""

    c0: float = 0.0
    c1: float = 0.0

    def __call__(self, t, x=None):
        # accepts both (t, x) and (x,) call forms
        if x is None:
            x = t
        return self.c0 + self.c1 * np.asarray(x, dtype=float)

    def derivative(self) -> "Affine":
        return Affine(self.c1, 0.0)

    @property
    def lipschitz(self) -> float:
        return abs(self.c1)


def _deriv(fn, given):
    if given is not None:
        return given
    if hasattr(fn, "derivative"):
        return fn.derivative()
    return None


@dataclass(frozen=True, eq=False)
class SchemeSpec:
    """Model coefficients plus discretisation settings.

    drift and diffusion are called as f(t, x) with x an array; jump_coef is
    called as gamma(x).  Derivatives are only needed by the Milstein and
    Taylor schemes and are read from `.derivative()` when the coefficient is
    an Affine.
    """

    kind: str
    drift: Coef
    diffusion: Coef
    x0: float
    T: float
    n: int
    jump_coef: Callable | None = None
    intensity: float = 0.0
    jump_law: JumpSizeLaw | None = None
    jump_mode: str = "short"
    nu_level: int = 50
    drift_dx: Coef | None = None
    drift_dxx: Coef | None = None
    diffusion_dx: Coef | None = None
    diffusion_dxx: Coef | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.n < 1 or not self.T > 0:
            raise ValueError("need n >= 1 and T > 0")
        if self.intensity < 0:
            raise ValueError("intensity must be nonnegative")
        if not math.isfinite(self.x0):
            raise ValueError("x0 must be finite")
        object.__setattr__(self, "drift_dx", _deriv(self.drift, self.drift_dx))
        object.__setattr__(self, "diffusion_dx", _deriv(self.diffusion, self.diffusion_dx))
        if self.drift_dxx is None and isinstance(self.drift, Affine):
            object.__setattr__(self, "drift_dxx", Affine())
        if self.diffusion_dxx is None and isinstance(self.diffusion, Affine):
            object.__setattr__(self, "diffusion_dxx", Affine())
        if self.kind in ("milstein", "taylor20") and self.diffusion_dx is None:
            raise ValueError(f"{self.kind} needs the derivative of the diffusion")
        if self.kind == "taylor20" and (self.drift_dx is None or self.drift_dxx is None
                                        or self.diffusion_dxx is None):
            raise ValueError("taylor20 needs b', b'' and sigma''")
        if self.kind == "jump_euler":
            if self.intensity > 0 and (self.jump_law is None or self.jump_coef is None):
                raise ValueError("jump_euler needs a jump law and a jump coefficient")
            m_max = parse_jump_mode(self.jump_mode)
            if m_max is None and self.intensity * self.h >= 1:
                raise ValueError(f"short-time mode needs lambda*h < 1, got {self.intensity * self.h}")

    @property
    def h(self) -> float:
        return self.T / self.n

    def t(self, k: int) -> float:
        return k * self.T / self.n

    @property
    def count_weights(self) -> np.ndarray:
        return jump_count_weights(self.intensity, self.h, self.jump_mode)

    @cached_property
    def quantized_jumps(self) -> list[JumpSizeLaw]:
        """Quantized laws of 1..m_max summed jumps (general jump laws only)."""
        q = quantize_jump_law(self.jump_law, self.nu_level)
        m_max = parse_jump_mode(self.jump_mode) or 1
        return jump_sum_laws(q, m_max, self.nu_level)


def step_components(spec: SchemeSpec, k: int, x) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Component weights w (M,) and coefficients A, B, C of shape (len(x), M).

    Given X_k = x, the next value is A + B Z + C Z^2 with probability w.
    """
    if not 0 <= k < spec.n:
        raise ValueError(f"step index {k} outside [0, {spec.n})")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    h, t = spec.h, spec.t(k)
    b = np.broadcast_to(spec.drift(t, x), x.shape).astype(float)
    s = np.broadcast_to(spec.diffusion(t, x), x.shape).astype(float)
    col = lambda v: np.asarray(v, dtype=float)[:, None]
    sqh = math.sqrt(h)

    if spec.kind == "euler" or (spec.kind == "jump_euler" and spec.intensity == 0):
        return np.ones(1), col(x + h * b), col(sqh * np.abs(s)), np.zeros((x.size, 1))

    if spec.kind == "milstein":
        ss = s * np.broadcast_to(spec.diffusion_dx(t, x), x.shape)
        D = 0.5 * h * ss
        return np.ones(1), col(x + h * b - D), col(sqh * s), col(D)

    if spec.kind == "taylor20":
        b1 = np.broadcast_to(spec.drift_dx(t, x), x.shape)
        b2 = np.broadcast_to(spec.drift_dxx(t, x), x.shape)
        s1 = np.broadcast_to(spec.diffusion_dx(t, x), x.shape)
        s2 = np.broadcast_to(spec.diffusion_dxx(t, x), x.shape)
        b_t = b * b1 + 0.5 * b2 * s * s
        s_t = b1 * s + b * s1 + 0.5 * s2 * s * s
        Bh = b * h + 0.5 * b_t * h * h
        Ch = s * sqh + 0.5 * s_t * h ** 1.5
        Dh = 0.5 * s * s1 * h
        return np.ones(1), col(x + Bh - Dh), col(Ch), col(Dh)

    # jump Euler
    g = np.broadcast_to(spec.jump_coef(x), x.shape).astype(float)
    pm = spec.count_weights
    lh = spec.intensity * h
    law = spec.jump_law
    base = x + h * b
    if law.kind == "gaussian":
        m = np.arange(pm.size)
        A = base[:, None] + law.mu_j * (m[None, :] - lh) * g[:, None]
        B = np.sqrt(h * s[:, None] ** 2 + m[None, :] * law.theta ** 2 * g[:, None] ** 2)
        return pm, A, B, np.zeros_like(A)
    comp = law.true_mean * lh
    weights = [pm[:1]]
    shifts = [np.zeros(1)]
    for m, q in enumerate(spec.quantized_jumps, start=1):
        weights.append(pm[m] * q.weights)
        shifts.append(q.atoms)
    w = np.concatenate(weights)
    u = np.concatenate(shifts)
    A = base[:, None] + (u[None, :] - comp) * g[:, None]
    B = np.broadcast_to(col(sqh * np.abs(s)), A.shape).copy()
    return w, A, B, np.zeros_like(A)


def step_law(spec: SchemeSpec, k: int, x: float) -> QuadraticGaussianMixture:
    """Conditional law of X_{k+1} given X_k = x."""
    w, A, B, C = step_components(spec, k, [x])
    w = w / math.fsum(w)
    return QuadraticGaussianMixture(w, A[0], B[0], C[0])


def mixture_law(spec: SchemeSpec, k: int, points, probs) -> QuadraticGaussianMixture:
    """Law of X_{k+1} when X_k is distributed on `points` with weights `probs`."""
    w, A, B, C = step_components(spec, k, points)
    W = (np.asarray(probs, dtype=float)[:, None] * w[None, :]).ravel()
    W = W / math.fsum(W)
    return QuadraticGaussianMixture(W, A.ravel(), B.ravel(), C.ravel())


def simulate_step(spec: SchemeSpec, k: int, x, rng: np.random.Generator) -> np.ndarray:
    """One draw of X_{k+1} per entry of x, using the exact jump-size law."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    z = rng.standard_normal(x.size)
    return _advance(spec, k, x, z, rng)


def _advance(spec, k, x, z, rng):
    h, t = spec.h, spec.t(k)
    if spec.kind != "jump_euler":
        _, A, B, C = step_components(spec, k, x)
        return A[:, 0] + B[:, 0] * z + C[:, 0] * z * z
    b = spec.drift(t, x)
    s = spec.diffusion(t, x)
    out = x + h * b + math.sqrt(h) * s * z
    if spec.intensity == 0:
        return out
    exact = spec.jump_law.exact
    pm = spec.count_weights
    counts = rng.choice(pm.size, size=x.size, p=pm / pm.sum())
    total = np.zeros(x.size)
    for m in range(1, pm.size):
        hit = counts >= m
        nhit = int(hit.sum())
        if nhit:
            total[hit] += exact.sample(rng, nhit)
    g = spec.jump_coef(x)
    return out + g * (total - spec.intensity * h * exact.true_mean)


@dataclass(frozen=True)
class CoefficientInputs:
    """Growth constants of one scheme step: L, Upsilon, E|zeta|^p and p."""

    L: float
    upsilon: float
    zeta_moment: float
    p: float = 3.0

    def __post_init__(self):
        if not (2.0 < self.p <= 3.0):
            raise ValueError(f"p must lie in (2, 3], got {self.p}")
        if self.L < 0 or self.upsilon < 0 or self.zeta_moment < 0:
            raise ValueError("L, upsilon and E|zeta|^p must be nonnegative")


def key_lemma_coeffs(inputs: CoefficientInputs, h: float) -> tuple[float, float, float, float]:
    """(kappa_p, K_p, alpha_p, beta_p) controlling the p-th moment of one step."""
    if h <= 0:
        raise ValueError("h must be positive")
    p, L = inputs.p, inputs.L
    kappa = (p - 1) * (p - 2) / 2 + 2 * p * L
    K = 2 ** (p - 1) * inputs.upsilon ** p * (1 + p + h ** (p / 2 - 1)) * inputs.zeta_moment
    alpha = (math.exp(kappa * h) * L + K) * h
    beta = 1 + (kappa * math.exp(kappa * h) + K) * h
    return kappa, K, alpha, beta


def jump_zeta_moment(p: float, bdg_constant: float, z_moment: float | None = None) -> float:
    """E|zeta|^p bound 2^{p/2-1}(E|Z|^p + c_p) for the jump scheme."""
    if z_moment is None:
        z_moment = 2 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)
    return 2 ** (p / 2 - 1) * (z_moment + bdg_constant)


_LIP_KEYS = {
    "euler": ("b", "sigma"),
    "jump_euler": ("b", "sigma", "gamma"),
    "milstein": ("b", "sigma", "sigma_sigma_prime"),
    "taylor20": ("b", "sigma", "b_tilde", "sigma_tilde", "sigma_sigma_prime_sq"),
}


def scheme_lipschitz(spec: SchemeSpec, lip: dict) -> np.ndarray:
    """Per-step Lipschitz constants [F_k]_Lip, k = 1..n.

    `lip` maps names to Lipschitz constants in x: b, sigma, gamma (jump
    Euler), sigma_sigma_prime (Milstein), b_tilde, sigma_tilde and
    sigma_sigma_prime_sq (Taylor).  A scalar applies to every step; an
    array of length n gives one value per step.
    """
    missing = [key for key in _LIP_KEYS[spec.kind] if key not in lip]
    if missing:
        raise ValueError(f"missing Lipschitz constants: {missing}")
    h, n = spec.h, spec.n
    v = {key: np.broadcast_to(np.asarray(lip[key], dtype=float), (n,)) for key in _LIP_KEYS[spec.kind]}
    if spec.kind == "euler":
        sq = (1 + h * v["b"]) ** 2 + h * v["sigma"] ** 2
    elif spec.kind == "jump_euler":
        eu2 = spec.jump_law.exact.second_moment if spec.jump_law is not None else 0.0
        sq = (1 + h * v["b"]) ** 2 + h * (v["sigma"] ** 2 + spec.intensity * eu2 * v["gamma"] ** 2)
    elif spec.kind == "milstein":
        sq = (1 + h * v["b"]) ** 2 + h * v["sigma"] ** 2 + 0.5 * h * h * v["sigma_sigma_prime"] ** 2
    else:
        sq = ((1 + h * v["b"] + 0.5 * h * h * v["b_tilde"]) ** 2
              + h * (v["sigma"] + 0.5 * h * v["sigma_tilde"]) ** 2
              + 0.5 * h * h * v["sigma_sigma_prime_sq"])
    return np.sqrt(sq)
