"""A priori strong and weak error bounds for recursive quantization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .laws import gaussian
from .quantizer import newton_optimize
from .schemes import CoefficientInputs, SchemeSpec, key_lemma_coeffs, scheme_lipschitz


@dataclass(frozen=True, eq=False)
class BoundCoefficients:
    """Per-step coefficients of the strong error bounds.

    alpha[0] holds ||X_0||_p^p; alpha[k], beta[k], lip[k] for k >= 1 are the
    step coefficients (beta[0] and lip[0] are unused).  `pierce` is the
    universal quantization constant and `product_constant` the one of the
    product bound (defaults to `pierce`).
    """

    p: float
    alpha: np.ndarray
    beta: np.ndarray
    lip: np.ndarray
    pierce: float = 1.0
    d: int = 1
    product_constant: float | None = None

    def __post_init__(self):
        if not (2.0 < self.p <= 3.0):
            raise ValueError(f"p must lie in (2, 3], got {self.p}")
        for name in ("alpha", "beta", "lip"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be finite and nonnegative")
            object.__setattr__(self, name, v)
        if not (self.alpha.size == self.beta.size == self.lip.size):
            raise ValueError("alpha, beta and lip must have length n + 1")
        if self.pierce <= 0 or self.d < 1:
            raise ValueError("pierce constant must be positive and d >= 1")

    @property
    def n(self) -> int:
        return self.alpha.size - 1


def _check(c: BoundCoefficients, levels, k: int) -> np.ndarray:
    N = np.asarray(levels, dtype=float)
    if N.size != c.n + 1:
        raise ValueError(f"need {c.n + 1} levels, got {N.size}")
    if np.any(N < 1):
        raise ValueError("levels must be >= 1")
    if not 0 <= k <= c.n:
        raise ValueError(f"k must lie in [0, {c.n}]")
    return N


def _inner_sums(c: BoundCoefficients, k: int, growth: float) -> np.ndarray:
    """S_i = sum_{l <= i} alpha_l beta_{l:i} growth^{i - l} for i = 0..k (recursively)."""
    S = np.empty(k + 1)
    S[0] = c.alpha[0]
    for i in range(1, k + 1):
        S[i] = S[i - 1] * c.beta[i] * growth + c.alpha[i]
    return S


def _outer(c: BoundCoefficients, N, k: int, S: np.ndarray) -> float:
    # [F_{i+1:k}] = prod_{m=i+1}^k lip[m], built from the right
    lip_tail = np.ones(k + 1)
    for i in range(k - 1, -1, -1):
        lip_tail[i] = lip_tail[i + 1] * c.lip[i + 1]
    terms = lip_tail * S ** (1.0 / c.p) * N[: k + 1] ** (-1.0 / c.d)
    return math.fsum(terms)


def regular_bound(c: BoundCoefficients, levels, k: int) -> float:
    """C sum_i [F_{i+1:k}] (sum_{l<=i} alpha_l beta_{l:i})^{1/p} N_i^{-1/d}."""
    N = _check(c, levels, k)
    return c.pierce * _outer(c, N, k, _inner_sums(c, k, 1.0))


def product_bound(c: BoundCoefficients, levels, k: int) -> float:
    """Product-quantization bound with the extra d^{(p/2 - 1)(i - l)} weights."""
    N = _check(c, levels, k)
    const = c.pierce if c.product_constant is None else c.product_constant
    growth = c.d ** (c.p / 2 - 1)
    return const * c.d ** ((c.p - 2) / (2 * c.p)) * _outer(c, N, k, _inner_sums(c, k, growth))


def step_bound(C0: float, C1: float, C2: float, T: float, n: int, x0_norm_p: float,
               levels, k: int, p: float = 3.0, pierce: float = 1.0, d: int = 1) -> float:
    """Bound under uniform per-step constants C0 (Lipschitz), C1 (alpha), C2 (beta).

    The bracket uses ||X_0||_p^p so that C0 = C1 = 0 reduces to
    pierce * ||X_0||_p * sum_i N_i^{-1/d}.  C2 = 0 uses the limit C1 t_k.
    """
    if n < 1 or T <= 0:
        raise ValueError("need n >= 1 and T > 0")
    if min(C0, C1, C2) < 0:
        raise ValueError("constants must be nonnegative")
    N = np.asarray(levels, dtype=float)
    if N.size != n + 1 or not 0 <= k <= n:
        raise ValueError("levels must have length n + 1 and 0 <= k <= n")
    h = T / n
    tk = k * h
    if C2 > 0:
        growth = (C1 / C2) * math.exp(C2 * h) * math.expm1(C2 * tk)
    else:
        growth = C1 * tk
    bracket = (math.exp(C1 * T) * x0_norm_p ** p + growth) ** (1.0 / p)
    i = np.arange(k + 1)
    terms = np.exp(C0 * (tk - i * h)) * bracket * N[: k + 1] ** (-1.0 / d)
    return pierce * math.fsum(terms)


@dataclass(frozen=True, eq=False)
class WeakErrorParams:
    grad_lip: float
    f_lip: float
    C: float
    C_prime: float
    h: float
    sq_errors: np.ndarray  # ||X^_l - X~_l||_2^2 for l = 0..n

    def __post_init__(self):
        e = np.atleast_1d(np.asarray(self.sq_errors, dtype=float))
        if min(self.grad_lip, self.f_lip, self.C, self.C_prime) < 0 or np.any(e < 0) or self.h <= 0:
            raise ValueError("weak-error parameters must be nonnegative (h > 0)")
        object.__setattr__(self, "sq_errors", e)


def weak_error_bound(w: WeakErrorParams, k: int) -> float:
    """1/2 sum_{l<=k} ([grad f]_Lip e^{C (k - l) h} + C' [f]_Lip t_k) e_l^2."""
    if not 0 <= k < w.sq_errors.size:
        raise ValueError("k outside the available errors")
    tk = k * w.h
    l = np.arange(k + 1)
    coef = w.grad_lip * np.exp(w.C * (k - l) * w.h) + w.C_prime * w.f_lip * tk
    return 0.5 * math.fsum(coef * w.sq_errors[: k + 1])


_PROP_KEYS = {
    "euler": ("b1", "b2", "s1", "ss2", "T"),
    "milstein": ("s1", "st1", "ss2", "sts2", "stst2", "T"),
    "jump_euler": ("b1", "b2", "s1", "ss2", "T", "intensity", "h", "EU", "EU2", "g1", "gg2", "g2"),
}


def propagation_constants(kind: str, **k) -> tuple[float, float]:
    """(C, C') with [grad P f]_Lip <= e^{Ch}[grad f]_Lip + C' [f]_Lip h.

    Sup-norms: b1 = ||b'||, b2 = ||b''||, s1 = ||sigma'||, ss2 = ||sigma sigma''||,
    and for Milstein with s~ = sigma sigma': st1 = ||s~'||, sts2 = ||s~ sigma''||,
    stst2 = ||s~ s~''||.  Jump Euler adds g1 = ||gamma'||, gg2 = ||gamma gamma''||,
    g2 = ||gamma''|| and the jump moments EU, EU2 at intensity and step h.
    Lipschitz constants of b and sigma are taken equal to ||b'|| and ||sigma'||.
    """
    if kind not in _PROP_KEYS:
        raise ValueError(f"no propagation constants for {kind!r}")
    missing = [key for key in _PROP_KEYS[kind] if key not in k]
    if missing:
        raise ValueError(f"missing constants: {missing}")
    if any(v < 0 for key, v in k.items() if key != "EU"):
        raise ValueError("sup-norms must be nonnegative")
    T = k["T"]
    if kind == "milstein":
        C = (k["s1"] ** 2 + 0.5 * T * k["st1"] ** 2 + k["ss2"] + math.sqrt(T) * k["sts2"]
             + 0.5 * (k["sts2"] + math.sqrt(T) * k["stst2"]))
        return C, 0.0
    b1, s1 = k["b1"], k["s1"]
    c_lip = b1 + 0.5 * s1 * s1
    c_prime = 2 * b1 + s1 * s1 + k["ss2"] + T * b1 * b1
    C, Cp = max(c_lip, c_prime), k["b2"]
    if kind == "euler":
        return C, Cp
    lam, h = k["intensity"], k["h"]
    lh = lam * h
    if lh == 0:
        return C, Cp
    lt = lam * k["EU"]
    eu_h2 = k["EU2"] - 2 * lt * h * k["EU"] + (lt * h) ** 2
    bracket = ((1 - lh) * ((1 + lh * k["g1"]) ** 2 + lh * k["gg2"] * eu_h2)
               + lh * (1 + k["g1"] ** 2 * eu_h2))
    return C + (bracket - 1) / h, Cp + (1 - lh) * lam * k["g2"]


def calibrate_pierce_constant(levels=(1, 2, 5, 10, 20, 50, 100), p: float = 3.0) -> float:
    """Smallest C with e_N(N(0,1)) <= C ||Z||_p N^{-1} over the given levels."""
    z_p = (2 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)) ** (1 / p)
    law = gaussian()
    ratios = []
    for N in levels:
        _, rep = newton_optimize(law, int(N))
        ratios.append(math.sqrt(rep.distortion) * N / z_p)
    return max(ratios)


def coefficients_for_scheme(spec: SchemeSpec, inputs: CoefficientInputs, lip: dict,
                            x0_norm_p: float, pierce: float = 1.0, d: int = 1) -> BoundCoefficients:
    """Homogeneous coefficients (same alpha, beta at every step) for a scheme."""
    _, _, alpha, beta = key_lemma_coeffs(inputs, spec.h)
    n = spec.n
    a = np.full(n + 1, alpha)
    a[0] = x0_norm_p ** inputs.p
    b = np.full(n + 1, beta)
    b[0] = 1.0
    L = np.concatenate([[1.0], scheme_lipschitz(spec, lip)])
    return BoundCoefficients(inputs.p, a, b, L, pierce=pierce, d=d)
