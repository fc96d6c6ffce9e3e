"""Monte Carlo reference simulation of the schemes.

Randomness is counter based: paths are cut into fixed-size blocks and block
b draws from a Philox stream keyed by (seed, b), so path j's draws depend
only on (seed, j).  Each block always simulates all of its paths, which
keeps the draws of a path unchanged when the total count M changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pricing import PutSpec
from .schemes import SchemeSpec, _advance

BLOCK = 65_536


@dataclass(frozen=True, eq=False)
class PathBatch:
    terminal: np.ndarray
    seed: int
    kind: str
    n: int

    @property
    def size(self) -> int:
        return self.terminal.size

    def mean(self) -> tuple[float, float]:
        x = self.terminal
        return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0

    def variance(self) -> tuple[float, float]:
        """Sample variance and its standard error (fourth-moment based)."""
        x = self.terminal
        m = np.mean(x)
        c = x - m
        var = float(np.var(x, ddof=1))
        m4 = float(np.mean(c ** 4))
        se = math.sqrt(max(m4 - var * var, 0.0) / x.size)
        return var, se


def block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), block]))


def simulate_paths(spec: SchemeSpec, M: int, seed: int, record: bool = False):
    """Terminal values of M paths (and all time steps when `record`)."""
    if M < 1:
        raise ValueError("M must be at least 1")
    out = np.empty(M)
    hist = np.empty((spec.n + 1, M)) if record else None
    for b in range(math.ceil(M / BLOCK)):
        rng = block_generator(seed, b)
        x = np.full(BLOCK, float(spec.x0))
        if record:
            steps = [x.copy()]
        for k in range(spec.n):
            z = rng.standard_normal(BLOCK)
            x = _advance(spec, k, x, z, rng)
            if record:
                steps.append(x.copy())
        lo, hi = b * BLOCK, min(M, (b + 1) * BLOCK)
        out[lo:hi] = x[: hi - lo]
        if record:
            hist[:, lo:hi] = np.array(steps)[:, : hi - lo]
    return (out, hist) if record else out


def simulate_terminal(spec: SchemeSpec, M: int, seed: int = 0) -> PathBatch:
    return PathBatch(simulate_paths(spec, M, seed), seed, spec.kind, spec.n)


def mc_put(batch: PathBatch, put: PutSpec) -> tuple[float, float]:
    """Discounted mean payoff and its standard error."""
    disc = math.exp(-put.rate * put.maturity)
    pay = np.maximum(put.strike - batch.terminal, 0.0)
    # block-wise fsum keeps the result independent of summation order
    price = disc * math.fsum(pay) / pay.size
    se = disc * float(np.std(pay, ddof=1)) / math.sqrt(pay.size) if pay.size > 1 else 0.0
    return price, se


def exact_step_means(spec: SchemeSpec) -> float:
    """E[X_n] for schemes with affine drift b(t, x) = c0 + c1 x (mean recursion)."""
    m = float(spec.x0)
    for k in range(spec.n):
        t = spec.t(k)
        b0 = float(spec.drift(t, np.array([0.0]))[0])
        b1 = float(spec.drift(t, np.array([1.0]))[0]) - b0
        m = m + spec.h * (b0 + b1 * m)
    return m
