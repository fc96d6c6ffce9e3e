"""Optimal quadratic quantization of scalar laws.

Newton's method on the distortion with its tridiagonal Hessian, safeguarded
by Lloyd's fixed-point map.  Cells are half-open intervals
(x^{j-1/2}, x^{j+1/2}] with the outer half-points at -inf and +inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solveh_banded
from scipy.special import ndtr

from .laws import ScalarLaw
from .special import SQRT_2PI


class ConvergenceError(RuntimeError):
    """Raised when neither Newton nor the Lloyd fallback reaches tolerance."""

    def __init__(self, message: str, report: "NewtonReport | None" = None, step: int | None = None):
        super().__init__(message)
        self.report = report
        self.step = step


@dataclass(frozen=True, eq=False)
class Grid:
    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=float)).copy()
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("grid needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def half_points(self) -> np.ndarray:
        """Cell edges: -inf, midpoints, +inf (length N + 1)."""
        p = self.points
        return np.concatenate(([-np.inf], 0.5 * (p[1:] + p[:-1]), [np.inf]))

    def project(self, y) -> np.ndarray:
        """Index of the cell containing each y (right-closed cells)."""
        edges = self.half_points
        return np.searchsorted(edges[1:-1], np.asarray(y, dtype=float), side="left")

    def __len__(self):
        return self.size


@dataclass
class NewtonReport:
    iterations: int = 0
    grad_norm: float = math.inf
    used_fallback: bool = False
    distortion: float = math.nan
    converged: bool = False
    lloyd_steps: int = 0
    init_distortion: float = math.nan


@dataclass(frozen=True)
class Tridiagonal:
    """Symmetric tridiagonal matrix stored as its diagonal and off-diagonal."""

    diag: np.ndarray
    off: np.ndarray

    def toarray(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve H x = rhs; raises LinAlgError unless H is positive definite."""
        if self.diag.size == 1:
            if self.diag[0] <= 0:
                raise LinAlgError("non-positive pivot")
            return rhs / self.diag[0]
        ab = np.zeros((2, self.diag.size))
        ab[0, 1:] = self.off
        ab[1] = self.diag
        return solveh_banded(ab, rhs, check_finite=True)


def _as_grid(grid) -> Grid:
    return grid if isinstance(grid, Grid) else Grid(grid)


def distortion(grid, law: ScalarLaw) -> float:
    """E[dist(Y, grid)^2]."""
    g = _as_grid(grid)
    _, _, second = law.cell_stats(g.half_points, g.points)
    return float(math.fsum(second))


def distortion_gradient(grid, law: ScalarLaw) -> np.ndarray:
    g = _as_grid(grid)
    _, first, _ = law.cell_stats(g.half_points, g.points)
    return -2.0 * first


def _hessian_from(points, edges, mass, law) -> Tridiagonal:
    gaps = np.diff(points)
    f_mid = law.density(edges[1:-1]) if points.size > 1 else np.zeros(0)
    edge_term = 0.5 * f_mid * gaps
    diag = 2.0 * mass.copy()
    diag[:-1] -= edge_term
    diag[1:] -= edge_term
    return Tridiagonal(diag, -edge_term)


def distortion_hessian(grid, law: ScalarLaw) -> Tridiagonal:
    """Tridiagonal Hessian; needs a density at each interior half-point."""
    g = _as_grid(grid)
    mass, _, _ = law.cell_stats(g.half_points, g.points)
    return _hessian_from(g.points, g.half_points, mass, law)


def companion_weights(grid, law: ScalarLaw) -> np.ndarray:
    """Masses of the Voronoi cells; the last one is the complement."""
    g = _as_grid(grid)
    mass, _, _ = law.cell_stats(g.half_points, g.points)
    mass = np.clip(mass, 0.0, 1.0)
    if mass.size > 1:
        mass[-1] = max(0.0, 1.0 - math.fsum(mass[:-1]))
    else:
        mass[0] = 1.0
    return mass


def _lloyd_update(points, mass, first):
    new = points.copy()
    ok = mass > 1e-15
    new[ok] = points[ok] + first[ok] / mass[ok]
    return new, ~ok


def _relocate(points, mass, empty):
    """Move points of empty cells next to the heaviest cell's point."""
    pts = list(points[~empty])
    w = list(mass[~empty])
    for _ in range(int(empty.sum())):
        j = int(np.argmax(w))
        if j + 1 < len(pts):
            new = 0.5 * (pts[j] + pts[j + 1])
        elif j > 0:
            new = 0.5 * (pts[j - 1] + pts[j])
        else:
            new = pts[j] + max(1.0, abs(pts[j])) * 1e-6
        half = 0.5 * w[j]
        w[j] = half
        pts.append(new)
        w.append(half)
        order = np.argsort(pts)
        pts = [pts[i] for i in order]
        w = [w[i] for i in order]
    return np.array(pts)


def _make_increasing(pts: np.ndarray) -> np.ndarray:
    q = np.sort(np.asarray(pts, dtype=float))
    for j in range(1, q.size):
        if q[j] <= q[j - 1]:
            q[j] = q[j - 1] + 1e-9 * max(1.0, abs(q[j - 1]))
    return q


def lloyd_step(grid, law: ScalarLaw) -> Grid:
    """Replace each point by the conditional mean of its cell."""
    g = _as_grid(grid)
    mass, first, _ = law.cell_stats(g.half_points, g.points)
    new, empty = _lloyd_update(g.points, mass, first)
    if empty.any():
        raise ValueError("degenerate cell: zero mass")
    return Grid(_make_increasing(new))


def init_grid(law: ScalarLaw, N: int) -> Grid:
    """Points at the (2j - 1) / (2N) quantiles of the law."""
    if N < 1:
        raise ValueError("N must be at least 1")
    levels = (2.0 * np.arange(1, N + 1) - 1.0) / (2.0 * N)
    return Grid(_make_increasing(law.quantile(levels)))


def newton_optimize(law: ScalarLaw, N: int, init=None, tol: float = 1e-10,
                    max_iter: int = 100, lloyd_max: int = 10_000) -> tuple[Grid, NewtonReport]:
    """Minimise the distortion of an N-point grid for `law`.

    Each iteration tries a Newton step with backtracking on the distortion.
    When the Hessian is not positive definite or the step does not lower
    the distortion, the Hessian is damped towards diag(2 * cell mass), which
    moves the step towards a Lloyd step.  Laws with atoms, or a step that
    fails at every damping level, fall back to plain Lloyd iterations.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    report = NewtonReport()
    if N == 1:
        pts = np.array([law.mean()])
        d = distortion(pts, law)
        if init is not None:
            report.init_distortion = distortion(init, law)
        report.grad_norm = float(np.max(np.abs(distortion_gradient(pts, law))))
        report.distortion = d
        report.converged = True
        return Grid(pts), report

    pts = init_grid(law, N).points.copy() if init is None else _as_grid(init).points.copy()
    if pts.size != N:
        raise ValueError(f"initial grid has {pts.size} points, expected {N}")

    def evaluate(p):
        edges = np.concatenate(([-np.inf], 0.5 * (p[1:] + p[:-1]), [np.inf]))
        mass, first, second = law.cell_stats(edges, p)
        return edges, mass, first, float(math.fsum(second))

    edges, mass, first, d = evaluate(pts)
    report.init_distortion = d
    newton_ok = not law.has_atoms

    mu = 0.0

    def newton_step():
        # Levenberg-Marquardt damping H + mu diag(2 mass): mu = 0 is the plain
        # Newton step, large mu tends to a shortened Lloyd step.
        nonlocal pts, edges, mass, first, d, mu
        report.iterations += 1
        H = _hessian_from(pts, edges, mass, law)
        scale = 2.0 * np.maximum(mass, 1e-300)
        for _ in range(30):
            try:
                delta = Tridiagonal(H.diag + mu * scale, H.off).solve(2.0 * first)
            except (LinAlgError, ValueError):
                delta = None
            if delta is not None and np.all(np.isfinite(delta)):
                t = 1.0
                for _ in range(8 if mu == 0.0 else 1):
                    cand = pts + t * delta
                    if np.all(np.diff(cand) > 0):
                        c_edges, c_mass, c_first, c_d = evaluate(cand)
                        # once the predicted decrease is below the roundoff of the
                        # distortion, a smaller gradient is the only usable signal
                        unresolved = abs(float(np.dot(first, t * delta))) < 1e-10 * d
                        if c_d <= d * (1.0 + 1e-14) or (
                                unresolved and c_d <= d * (1.0 + 1e-9)
                                and np.max(np.abs(c_first)) < np.max(np.abs(first))):
                            pts, edges, mass, first, d = cand, c_edges, c_mass, c_first, c_d
                            mu = 0.0 if mu < 1e-3 else mu / 10.0
                            return True
                    t *= 0.5
            mu = 1e-3 if mu == 0.0 else mu * 10.0
            if mu > 1e12:
                break
        mu = 0.0
        return False

    while True:
        gnorm = float(np.max(np.abs(first))) * 2.0
        report.grad_norm, report.distortion = gnorm, d
        if gnorm <= tol:
            if newton_ok and report.iterations < max_iter:
                # one extra step pushes the residual well below tolerance
                saved = (pts, edges, mass, first, d)
                if newton_step() and 2.0 * float(np.max(np.abs(first))) > gnorm:
                    pts, edges, mass, first, d = saved
                report.grad_norm = 2.0 * float(np.max(np.abs(first)))
                report.distortion = d
            report.converged = True
            return Grid(pts), report
        if newton_ok and report.iterations < max_iter and newton_step():
            continue
        if report.lloyd_steps >= lloyd_max:
            break
        report.used_fallback = True
        report.lloyd_steps += 1
        new, empty = _lloyd_update(pts, mass, first)
        if empty.any():
            new = _relocate(new, mass, empty)
        new = _make_increasing(new)
        c_edges, c_mass, c_first, c_d = evaluate(new)
        if c_d > d * (1.0 + 1e-12):
            break
        pts, edges, mass, first, d = new, c_edges, c_mass, c_first, c_d

    raise ConvergenceError(
        f"quantizer did not converge: gradient sup-norm {report.grad_norm:.3e} > {tol:.1e}",
        report)


# -- closed-form Gaussian-mixture assembly --------------------------------

def gaussian_mixture_gradient(points, weights, means, stds) -> np.ndarray:
    """Distortion gradient of a Gaussian mixture written with Phi0 and Phi0'.

    For component (mu, v) with standardised half-points t^{j-}, t^{j+},
        dD/dx_j += 2 w [(x_j - mu)(Phi0(t^{j+}) - Phi0(t^{j-})) + v (Phi0'(t^{j+}) - Phi0'(t^{j-}))].
    """
    x = np.asarray(points, dtype=float)
    edges = np.concatenate(([-np.inf], 0.5 * (x[1:] + x[:-1]), [np.inf]))
    grad = np.zeros_like(x)
    for w, mu, v in zip(weights, means, stds):
        t = (edges - mu) / v
        Phi = ndtr(t)
        dPhi = np.where(np.isfinite(t), np.exp(-0.5 * np.where(np.isfinite(t), t, 0) ** 2) / SQRT_2PI, 0.0)
        grad += 2 * w * ((x - mu) * (Phi[1:] - Phi[:-1]) + v * (dPhi[1:] - dPhi[:-1]))
    return grad


def gaussian_mixture_hessian(points, weights, means, stds) -> Tridiagonal:
    """Tridiagonal Hessian of a Gaussian-mixture distortion in the same form."""
    x = np.asarray(points, dtype=float)
    edges = np.concatenate(([-np.inf], 0.5 * (x[1:] + x[:-1]), [np.inf]))
    diag = np.zeros_like(x)
    off = np.zeros(x.size - 1)
    gaps = np.diff(x)
    for w, mu, v in zip(weights, means, stds):
        t = (edges - mu) / v
        Phi = ndtr(t)
        inner = t[1:-1]
        dPhi = np.exp(-0.5 * inner * inner) / SQRT_2PI
        diag += 2 * w * (Phi[1:] - Phi[:-1])
        term = w * dPhi * gaps / (2 * v)
        diag[:-1] -= term
        diag[1:] -= term
        off -= term
    return Tridiagonal(diag, off)
