"""Chain bundles on disk.

A bundle is a directory holding

    manifest.json              levels, tolerances, timings, free-form metadata
    grid_000.csv ...           columns index, point, weight
    transition_000.csv ...     columns i, j, p_ij (step k -> k + 1, nonzero entries)

Floats are written with 17 significant digits so that reading a bundle
back reproduces every value bit for bit.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .engine import QuantizedChain
from .quantizer import Grid, NewtonReport

FLOAT_FMT = "%.17g"


def fmt(v: float) -> str:
    return FLOAT_FMT % v


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def save_chain(chain: QuantizedChain, out_dir, metadata: dict | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(chain.n)))
    for k, (g, w) in enumerate(zip(chain.grids, chain.weights)):
        rows = ((i, float(x), float(p)) for i, (x, p) in enumerate(zip(g.points, w)))
        write_csv(out / f"grid_{k:0{width}d}.csv", ["index", "point", "weight"], rows)
    for k, P in enumerate(chain.transitions):
        ii, jj = np.nonzero(P)
        rows = ((int(i), int(j), float(P[i, j])) for i, j in zip(ii, jj))
        write_csv(out / f"transition_{k:0{width}d}.csv", ["i", "j", "p_ij"], rows)
    manifest = {
        "format": "recquant-chain/1",
        "n": chain.n,
        "levels": chain.levels,
        "width": width,
        "reports": [
            {"iterations": r.iterations, "grad_norm": fmt(r.grad_norm), "used_fallback": r.used_fallback,
             "distortion": fmt(r.distortion), "converged": r.converged, "lloyd_steps": r.lloyd_steps,
             "init_distortion": fmt(r.init_distortion)}
            for r in chain.reports
        ],
    }
    if metadata:
        manifest["metadata"] = metadata
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def load_chain(path) -> QuantizedChain:
    src = Path(path)
    with open(src / "manifest.json") as fh:
        manifest = json.load(fh)
    width, n, levels = manifest["width"], manifest["n"], manifest["levels"]
    grids, weights, transitions = [], [], []
    for k in range(n + 1):
        data = np.loadtxt(src / f"grid_{k:0{width}d}.csv", delimiter=",", skiprows=1, ndmin=2)
        grids.append(Grid(data[:, 1]))
        weights.append(data[:, 2].copy())
    for k in range(n):
        P = np.zeros((levels[k], levels[k + 1]))
        data = np.loadtxt(src / f"transition_{k:0{width}d}.csv", delimiter=",", skiprows=1, ndmin=2)
        if data.size:
            P[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2]
        transitions.append(P)
    reports = [NewtonReport(iterations=r["iterations"], grad_norm=float(r["grad_norm"]),
                            used_fallback=r["used_fallback"], distortion=float(r["distortion"]),
                            converged=r["converged"], lloyd_steps=r["lloyd_steps"],
                            init_distortion=float(r.get("init_distortion", "nan")))
               for r in manifest.get("reports", [])]
    return QuantizedChain(grids, weights, transitions, reports)
