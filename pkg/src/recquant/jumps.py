"""Jump-size laws and jump-count weights for compound Poisson drivers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .laws import ScalarLaw, ShiftedLognormal, gaussian, gaussian_mixture
from .quantizer import companion_weights, newton_optimize


@dataclass(frozen=True, eq=False)
class JumpSizeLaw:
    """Law of a single jump size U.

    kind is one of "gaussian" (U ~ N(mu_j, theta^2)), "lognormal_shift"
    (U = exp(xi) - 1 with xi ~ N(0, theta^2)), "quantized" (finite atoms)
    or "custom" (any ScalarLaw).  A quantized law keeps the moments of the
    law it was built from so that compensators can use the exact mean.
    """

    kind: str
    mu_j: float = 0.0
    theta: float = 0.0
    atoms: np.ndarray | None = None
    weights: np.ndarray | None = None
    law: ScalarLaw | None = None
    source: "JumpSizeLaw | None" = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "lognormal_shift", "quantized", "custom"):
            raise ValueError(f"unknown jump law kind {self.kind!r}")
        if self.kind in ("gaussian", "lognormal_shift") and self.theta < 0:
            raise ValueError("theta must be nonnegative")
        if self.kind == "lognormal_shift" and self.theta == 0:
            raise ValueError("lognormal jumps need theta > 0")
        if self.kind == "quantized":
            a = np.asarray(self.atoms, dtype=float)
            w = np.asarray(self.weights, dtype=float)
            if a.shape != w.shape or a.ndim != 1 or a.size == 0:
                raise ValueError("atoms and weights must be matching 1-D arrays")
            if np.any(w < 0) or abs(math.fsum(w) - 1.0) > 1e-12:
                raise ValueError("quantized weights must be a probability vector")
            object.__setattr__(self, "atoms", a)
            object.__setattr__(self, "weights", w)
        if self.kind == "custom" and self.law is None:
            raise ValueError("custom jump law needs a ScalarLaw")

    def scalar_law(self) -> ScalarLaw:
        if self.kind == "gaussian":
            return gaussian(self.mu_j, self.theta)
        if self.kind == "lognormal_shift":
            return ShiftedLognormal(loc=-1.0, scale=1.0, mu=0.0, theta=self.theta)
        if self.kind == "quantized":
            return gaussian_mixture(self.weights, self.atoms, np.zeros_like(self.atoms))
        return self.law

    @property
    def mean(self) -> float:
        if self.kind == "gaussian":
            return self.mu_j
        if self.kind == "lognormal_shift":
            return math.expm1(0.5 * self.theta ** 2)
        if self.kind == "quantized":
            return math.fsum(self.weights * self.atoms)
        return self.law.mean()

    @property
    def second_moment(self) -> float:
        if self.kind == "gaussian":
            return self.mu_j ** 2 + self.theta ** 2
        if self.kind == "lognormal_shift":
            t2 = self.theta ** 2
            # E(e^xi - 1)^2 = e^{2 t2} - 2 e^{t2/2} + 1
            return math.exp(2 * t2) - 2 * math.exp(0.5 * t2) + 1.0
        if self.kind == "quantized":
            return math.fsum(self.weights * self.atoms ** 2)
        m = self.law.mean()
        return self.law.variance() + m * m

    @property
    def true_mean(self) -> float:
        """Mean of the exact law (the source law for quantized sizes)."""
        return self.source.true_mean if self.source is not None else self.mean

    @property
    def exact(self) -> "JumpSizeLaw":
        return self.source.exact if self.source is not None else self

    def abs_moment(self, p: float) -> float:
        return self.scalar_law().abs_moment(p)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "gaussian":
            return self.mu_j + self.theta * rng.standard_normal(size)
        if self.kind == "lognormal_shift":
            return np.expm1(self.theta * rng.standard_normal(size))
        if self.kind == "quantized":
            return rng.choice(self.atoms, size=size, p=self.weights)
        return self.law.sample(rng, size)


def gaussian_jumps(mu_j: float, theta: float) -> JumpSizeLaw:
    return JumpSizeLaw("gaussian", mu_j=mu_j, theta=theta)


def lognormal_jumps(theta: float) -> JumpSizeLaw:
    return JumpSizeLaw("lognormal_shift", theta=theta)


def custom_jumps(law: ScalarLaw) -> JumpSizeLaw:
    return JumpSizeLaw("custom", law=law)


def quantize_jump_law(law: JumpSizeLaw, n_nu: int, tol: float = 1e-10) -> JumpSizeLaw:
    """Replace the jump-size law by its optimal n_nu-point quantization."""
    if law.kind == "quantized" and law.atoms.size <= n_nu:
        return law
    target = law.scalar_law()
    grid, _ = newton_optimize(target, n_nu, tol=tol)
    w = companion_weights(grid, target)
    return JumpSizeLaw("quantized", atoms=grid.points.copy(), weights=w, source=law)


def parse_jump_mode(mode) -> int | None:
    """None for the short-time mode, else the truncation level m_max."""
    if mode is None or mode == "short" or mode == "short_time":
        return None
    if isinstance(mode, int):
        m = mode
    elif isinstance(mode, str) and mode.startswith("truncated"):
        _, _, tail = mode.partition(":")
        m = int(tail) if tail else 3
    elif isinstance(mode, tuple) and mode[0] == "truncated":
        m = int(mode[1])
    else:
        raise ValueError(f"unknown jump mode {mode!r}")
    if m < 1:
        raise ValueError("truncation level must be at least 1")
    return m


def jump_count_weights(intensity: float, h: float, mode="short") -> np.ndarray:
    """Probabilities of 0, 1, ... jumps during one step.

    Short-time mode allows at most one jump (weights 1 - lambda h and
    lambda h).  Truncated mode uses Poisson weights up to m_max with the
    remaining tail mass folded into the last entry.
    """
    if intensity < 0 or h <= 0:
        raise ValueError("intensity must be >= 0 and h > 0")
    lh = intensity * h
    m_max = parse_jump_mode(mode)
    if m_max is None:
        if lh >= 1:
            raise ValueError(f"short-time mode needs lambda*h < 1, got {lh}")
        return np.array([1.0 - lh, lh])
    m = np.arange(m_max)
    w = np.exp(-lh + m * math.log(lh) - np.array([math.lgamma(k + 1) for k in m])) if lh > 0 \
        else np.where(m == 0, 1.0, 0.0)
    return np.append(w, max(0.0, 1.0 - math.fsum(w)))


def convolve_atoms(a: JumpSizeLaw, b: JumpSizeLaw, n_max: int) -> JumpSizeLaw:
    """Law of the sum of two independent quantized jumps, compressed to n_max atoms."""
    atoms = (a.atoms[:, None] + b.atoms[None, :]).ravel()
    weights = (a.weights[:, None] * b.weights[None, :]).ravel()
    order = np.argsort(atoms, kind="stable")
    atoms, weights = atoms[order], weights[order]
    weights = weights / math.fsum(weights)
    full = JumpSizeLaw("quantized", atoms=atoms, weights=weights)
    if atoms.size <= n_max:
        return full
    target = full.scalar_law()
    grid, _ = newton_optimize(target, n_max, tol=1e-12)
    w = companion_weights(grid, target)
    return JumpSizeLaw("quantized", atoms=grid.points.copy(), weights=w)


def jump_sum_laws(law: JumpSizeLaw, m_max: int, n_max: int) -> list[JumpSizeLaw]:
    """Quantized laws of U_1 + ... + U_m for m = 1..m_max."""
    out = [law]
    for _ in range(1, m_max):
        out.append(convolve_atoms(out[-1], law, n_max))
    return out
