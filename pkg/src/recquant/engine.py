"""Recursive marginal quantization of a discretisation scheme."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .laws import gaussian_mixture
from .quantizer import (ConvergenceError, Grid, NewtonReport, companion_weights,
                        init_grid, newton_optimize)
from .schemes import SchemeSpec, mixture_law, step_law


def expand_levels(levels, n: int) -> list[int]:
    """Normalise a level policy to [N_0, ..., N_n] with N_0 = 1."""
    if isinstance(levels, (int, np.integer)):
        out = [1] + [int(levels)] * n
    else:
        out = [int(v) for v in levels]
        if len(out) == n:
            out = [1] + out
    if len(out) != n + 1:
        raise ValueError(f"need {n + 1} levels (or {n}), got {len(out)}")
    if out[0] != 1:
        raise ValueError("a deterministic starting point needs N_0 = 1")
    if min(out) < 1:
        raise ValueError("levels must be >= 1")
    return out


@dataclass
class QuantizedChain:
    grids: list[Grid]
    weights: list[np.ndarray]
    transitions: list[np.ndarray]
    reports: list[NewtonReport] = field(default_factory=list)
    timings: list[float] = field(default_factory=list)

    @property
    def levels(self) -> list[int]:
        return [g.size for g in self.grids]

    @property
    def n(self) -> int:
        return len(self.grids) - 1

    @property
    def distortions(self) -> np.ndarray:
        """Squared quantization errors ||X^_k - X~_k||_2^2 (zero at k = 0)."""
        return np.array([0.0] + [r.distortion for r in self.reports])

    def mean(self, k: int | None = None) -> float:
        k = self.n if k is None else k
        return math.fsum(self.weights[k] * self.grids[k].points)

    def variance(self, k: int | None = None) -> float:
        k = self.n if k is None else k
        m = self.mean(k)
        return math.fsum(self.weights[k] * (self.grids[k].points - m) ** 2)

    @property
    def terminal(self) -> tuple[np.ndarray, np.ndarray]:
        return self.grids[-1].points, self.weights[-1]


def _warm_start(prev_pts, prev_w, law, N):
    """Previous grid moved to the new law's mean and scaled by the std ratio."""
    m_prev = math.fsum(prev_w * prev_pts)
    s_prev = math.sqrt(max(math.fsum(prev_w * (prev_pts - m_prev) ** 2), 0.0))
    s_new = law.std()
    if s_prev <= 0 or s_new <= 0:
        return None
    pts = law.mean() + (prev_pts - m_prev) * (s_new / s_prev)
    if np.any(np.diff(pts) <= 0):
        return None
    return Grid(pts)


def transition_matrix(spec: SchemeSpec, k: int, points, grid_next: Grid) -> np.ndarray:
    """Rows P(X_{k+1} in cell j | X_k = x_i) for every x_i in `points`."""
    points = np.atleast_1d(np.asarray(points, dtype=float))
    law = mixture_law(spec, k, points, np.full(points.size, 1.0 / points.size))
    masses = law.component_cell_masses(grid_next.half_points)
    M = masses.shape[0] // points.size
    comp_w = law.weights.reshape(points.size, M) * points.size
    rows = np.einsum("ic,icj->ij", comp_w, masses.reshape(points.size, M, -1))
    rows = np.clip(rows, 0.0, None)
    return rows / rows.sum(axis=1, keepdims=True)


def transition_row(spec: SchemeSpec, k: int, x_i: float, grid_next: Grid) -> np.ndarray:
    return transition_matrix(spec, k, [x_i], grid_next)[0]


def recursive_quantize(spec: SchemeSpec, levels, tol: float = 1e-10, max_iter: int = 100,
                       warm_start: bool = True,
                       progress: Callable[[int, NewtonReport], None] | None = None) -> QuantizedChain:
    """Quantize X_0, ..., X_n one step at a time.

    The law of X~_{k+1} is the mixture over the current grid of the one-step
    laws, weighted by the current companion weights; its optimal grid gives
    the next quantization.
    """
    N = expand_levels(levels, spec.n)
    grids = [Grid([spec.x0])]
    weights = [np.ones(1)]
    transitions: list[np.ndarray] = []
    reports: list[NewtonReport] = []
    timings: list[float] = []
    for k in range(spec.n):
        t0 = time.perf_counter()
        pts, p = grids[-1].points, weights[-1]
        law = mixture_law(spec, k, pts, p)
        init = None
        if warm_start and pts.size == N[k + 1] and N[k + 1] > 1:
            init = _warm_start(pts, p, law, N[k + 1])
        if law.variance() == 0.0:
            # deterministic step: any grid containing the atom is optimal
            init = init or init_grid(law, N[k + 1])
        try:
            grid, report = newton_optimize(law, N[k + 1], init=init, tol=tol, max_iter=max_iter)
        except ConvergenceError as err:
            raise ConvergenceError(f"step {k + 1}: {err}", err.report, step=k + 1) from err
        masses = law.component_cell_masses(grid.half_points)
        M = masses.shape[0] // pts.size
        comp_w = law.weights.reshape(pts.size, M)
        cell = masses.reshape(pts.size, M, -1)
        joint = np.einsum("ic,icj->ij", comp_w, cell)
        row_mass = joint.sum(axis=1, keepdims=True)
        trans = np.clip(joint / np.where(row_mass > 0, row_mass, 1.0), 0.0, None)
        empty = trans.sum(axis=1) <= 0
        if empty.any():
            # zero-probability origins: use the conditional kernel directly
            trans[empty] = transition_matrix(spec, k, pts[empty], grid)
        trans /= trans.sum(axis=1, keepdims=True)
        grids.append(grid)
        weights.append(companion_weights(grid, law))
        transitions.append(trans)
        reports.append(report)
        timings.append(time.perf_counter() - t0)
        if progress is not None:
            progress(k + 1, report)
    return QuantizedChain(grids, weights, transitions, reports, timings)


def chain_residuals(chain: QuantizedChain, spec: SchemeSpec | None = None) -> dict:
    """Largest consistency residuals of a chain.

    weight_sum: |sum_i p_k^i - 1|; row_sum: |sum_j p_k^{ij} - 1|;
    chapman_kolmogorov: |p_{k+1} - p_k P_k|; stationarity: the gap between
    the quantized mean at k + 1 and the mean of the mixture law it quantizes.
    """
    res = {"weight_sum": 0.0, "row_sum": 0.0, "chapman_kolmogorov": 0.0, "stationarity": 0.0}
    for k, w in enumerate(chain.weights):
        res["weight_sum"] = max(res["weight_sum"], abs(math.fsum(w) - 1.0))
    for k, P in enumerate(chain.transitions):
        res["row_sum"] = max(res["row_sum"], float(np.max(np.abs(P.sum(axis=1) - 1.0))))
        ck = np.max(np.abs(chain.weights[k] @ P - chain.weights[k + 1]))
        res["chapman_kolmogorov"] = max(res["chapman_kolmogorov"], float(ck))
        if spec is not None:
            law = mixture_law(spec, k, chain.grids[k].points, chain.weights[k])
            gap = abs(chain.mean(k + 1) - law.mean())
            res["stationarity"] = max(res["stationarity"], gap)
    return res


def density_estimate(grid, weights) -> np.ndarray:
    """Piecewise-constant density rows (left, right, value).

    On [x^{i-1}, x^i] the value is 2 p^i / (x^{i+1} - x^{i-1}) for the
    interior points i = 2, ..., N - 1 (1-based); it is not renormalised.
    """
    x = grid.points if isinstance(grid, Grid) else np.asarray(grid, dtype=float)
    p = np.asarray(weights, dtype=float)
    if x.size < 3:
        raise ValueError("density estimate needs at least 3 grid points")
    i = np.arange(1, x.size - 1)
    value = 2 * p[i] / (x[i + 1] - x[i - 1])
    return np.column_stack([x[i - 1], x[i], value])


# -- componentwise product quantization ------------------------------------

@dataclass(frozen=True, eq=False)
class VectorEulerSpec:
    """d-dimensional Euler scheme X + h b(t, X) + sqrt(h) sigma(t, X) Z.

    drift(t, x) maps (m, d) to (m, d); diffusion(t, x) maps (m, d) to
    (m, d, q).
    """

    drift: Callable
    diffusion: Callable
    x0: np.ndarray
    T: float
    n: int

    def __post_init__(self):
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))
        if self.n < 1 or not self.T > 0:
            raise ValueError("need n >= 1 and T > 0")

    @property
    def d(self) -> int:
        return self.x0.size

    @property
    def h(self) -> float:
        return self.T / self.n


@dataclass
class ProductChain:
    grids: list[list[Grid]]  # grids[k][l]
    node_weights: list[np.ndarray]  # shape (N_k^1, ..., N_k^d)
    reports: list[list[NewtonReport]] = field(default_factory=list)

    @property
    def levels(self) -> list[tuple[int, ...]]:
        return [tuple(g.size for g in gk) for gk in self.grids]

    def nodes(self, k: int) -> np.ndarray:
        axes = [g.points for g in self.grids[k]]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def _gauss_legendre_half(n):
    x, w = np.polynomial.legendre.leggauss(n)
    keep = x > 0
    return x[keep], w[keep]


_GL = {n: _gauss_legendre_half(n) for n in (6, 12, 20)}


def bvn_upper(dh: float, dk: float, r: float) -> float:
    """P(X > dh, Y > dk) for a standard bivariate normal with correlation r.

    Gauss-Legendre evaluation of the Drezner-Wesolowsky/Genz integral form,
    accurate to about 1e-15.
    """
    if dh == math.inf or dk == math.inf:
        return 0.0
    if dh == -math.inf:
        return 1.0 if dk == -math.inf else float(ndtr(-dk))
    if dk == -math.inf:
        return float(ndtr(-dh))
    if r == 0:
        return float(ndtr(-dh) * ndtr(-dk))
    tp = 2 * math.pi
    h, k = dh, dk
    hk = h * k
    ar = abs(r)
    xg, wg = _GL[6] if ar < 0.3 else _GL[12] if ar < 0.75 else _GL[20]
    x = np.concatenate([1 - xg, 1 + xg])
    w = np.concatenate([wg, wg])
    if ar < 0.925:
        hs = (h * h + k * k) / 2
        asr = math.asin(r) / 2
        sn = np.sin(asr * x)
        bvn = float(np.exp((sn * hk - hs) / (1 - sn * sn)) @ w)
        bvn = bvn * asr / tp + float(ndtr(-h) * ndtr(-k))
    else:
        if r < 0:
            k, hk = -k, -hk
        bvn = 0.0
        if ar < 1:
            as_ = 1 - r * r
            a = math.sqrt(as_)
            bs = (h - k) ** 2
            c = (4 - hk) / 8
            d = (12 - hk) / 80
            asr = -(bs / as_ + hk) / 2
            if asr > -100:
                bvn = a * math.exp(asr) * (1 - c * (bs - as_) * (1 - d * bs) / 3 + c * d * as_ * as_)
            if hk > -100:
                b = math.sqrt(bs)
                sp = math.sqrt(tp) * float(ndtr(-b / a))
                bvn -= math.exp(-hk / 2) * sp * b * (1 - c * bs * (1 - d * bs) / 3)
            a /= 2
            xs = (a * x) ** 2
            asr = -(bs / xs + hk) / 2
            ok = asr > -100
            sp = 1 + c * xs * (1 + 5 * d * xs)
            rs = np.sqrt(1 - xs)
            ep = np.exp(-(hk / 2) * xs / (1 + rs) ** 2) / rs
            bvn += float(np.sum(np.where(ok, a * w * np.exp(np.where(ok, asr, 0.0)) * (ep - sp), 0.0)))
            bvn = -bvn / tp
        if r > 0:
            bvn += float(ndtr(-max(h, k)))
        elif h >= k:
            bvn = -bvn
        else:
            L = float(ndtr(k) - ndtr(h)) if h < 0 else float(ndtr(-h) - ndtr(-k))
            bvn = L - bvn
    return min(1.0, max(0.0, bvn))


def bvn_rectangle_masses(e1, e2, m1, m2, s1, s2, rho) -> np.ndarray:
    """P(X in cell (i, j)) for X ~ N((m1, m2), [[s1^2, rho s1 s2], [., s2^2]])."""
    a = (np.asarray(e1, dtype=float) - m1) / s1
    b = (np.asarray(e2, dtype=float) - m2) / s2
    # lower-orthant cdf F(a, b) = P(X <= a, Y <= b) = bvn_upper(-a, -b, rho)
    F = np.array([[bvn_upper(-ai, -bj, rho) for bj in b] for ai in a])
    cells = F[1:, 1:] - F[:-1, 1:] - F[1:, :-1] + F[:-1, :-1]
    return np.clip(cells, 0.0, 1.0)


def product_quantize(spec: VectorEulerSpec, levels, tol: float = 1e-10,
                     max_iter: int = 100) -> ProductChain:
    """Componentwise product recursive quantization of a vector Euler scheme.

    `levels` is an int, a per-dimension tuple, or a list of per-step tuples
    (length n or n + 1).
    """
    d, n, h = spec.d, spec.n, spec.h
    if d < 2:
        raise ValueError("product quantization needs d >= 2")
    if isinstance(levels, (int, np.integer)):
        per_step = [(int(levels),) * d] * n
    elif len(levels) == d and all(isinstance(v, (int, np.integer)) for v in levels):
        per_step = [tuple(int(v) for v in levels)] * n
    else:
        per_step = [tuple(int(v) for v in lv) for lv in levels]
        if len(per_step) == n + 1:
            per_step = per_step[1:]
    if len(per_step) != n or any(len(lv) != d for lv in per_step):
        raise ValueError("levels must give d values for each of the n steps")

    grids = [[Grid([v]) for v in spec.x0]]
    node_w = [np.ones((1,) * d)]
    reports: list[list[NewtonReport]] = []
    sqh = math.sqrt(h)
    for k in range(n):
        t = k * h
        axes = [g.points for g in grids[-1]]
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=1)
        p = node_w[-1].ravel()
        b = np.asarray(spec.drift(t, nodes), dtype=float).reshape(nodes.shape)
        sig = np.asarray(spec.diffusion(t, nodes), dtype=float).reshape(nodes.shape[0], d, -1)
        means = nodes + h * b
        cov = h * np.einsum("mlq,mjq->mlj", sig, sig)
        stds = np.sqrt(np.einsum("mll->ml", cov))
        off = cov - np.einsum("ml,lj->mlj", stds ** 2, np.eye(d))
        orthogonal = np.all(np.abs(off) <= 1e-14 * np.maximum(1.0, cov.max()))
        if not orthogonal and d > 2:
            raise ValueError("correlated product quantization is only supported for d = 2")

        new_grids, step_reports = [], []
        for l in range(d):
            law = gaussian_mixture(p / p.sum(), means[:, l], stds[:, l])
            prev = grids[-1][l]
            init = None
            if prev.size == per_step[k][l] and prev.size > 1:
                init = _warm_start(prev.points, _marginal(node_w[-1], l), law, prev.size)
            if law.variance() == 0.0 and init is None:
                init = init_grid(law, per_step[k][l])
            try:
                g, rep = newton_optimize(law, per_step[k][l], init=init, tol=tol, max_iter=max_iter)
            except ConvergenceError as err:
                raise ConvergenceError(f"step {k + 1}, component {l}: {err}", err.report,
                                       step=k + 1) from err
            new_grids.append(g)
            step_reports.append(rep)

        shape = tuple(g.size for g in new_grids)
        W = np.zeros(shape)
        for m in range(nodes.shape[0]):
            if p[m] == 0:
                continue
            if orthogonal:
                cell = _factor_masses(new_grids, means[m], stds[m])
            else:
                rho = cov[m, 0, 1] / (stds[m, 0] * stds[m, 1])
                cell = bvn_rectangle_masses(new_grids[0].half_points, new_grids[1].half_points,
                                            means[m, 0], means[m, 1], stds[m, 0], stds[m, 1], rho)
            W += p[m] * cell
        W /= W.sum()
        grids.append(new_grids)
        node_w.append(W)
        reports.append(step_reports)
    return ProductChain(grids, node_w, reports)


def _marginal(W: np.ndarray, axis: int) -> np.ndarray:
    other = tuple(i for i in range(W.ndim) if i != axis)
    return W.sum(axis=other)


def _factor_masses(grids: Sequence[Grid], mean, std) -> np.ndarray:
    out = np.ones(())
    for l, g in enumerate(grids):
        law = gaussian_mixture([1.0], [mean[l]], [std[l]])
        m = law.component_cell_masses(g.half_points)[0]
        out = np.multiply.outer(out, m)
    return out
