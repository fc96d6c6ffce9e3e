"""Command-line entry point: quantize, price, table1, density, bounds, compare-mc."""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bounds import (BoundCoefficients, WeakErrorParams, product_bound, regular_bound,
                     step_bound, weak_error_bound)
from .chain_io import fmt, save_chain, write_csv
from .config import ConfigError, JobConfig, build_job, load_raw, parse_levels
from .engine import density_estimate, recursive_quantize
from .mc import mc_put, simulate_terminal
from .pricing import MertonModel, PutSpec, bs_put, merton_put_closed_form, merton_scheme, quantized_put
from .quantizer import ConvergenceError
from .schemes import CoefficientInputs, key_lemma_coeffs, scheme_lipschitz

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_IO = 0, 2, 3, 4

TABLE1_STRIKES = [90.0, 92.0, 94.0, 96.0, 98.0, 100.0]
TABLE1_INTENSITIES = [1.0, 3.0, 5.0]
TABLE1_JUMP_VOLS = [0.01, 0.04]
PRICE_HEADER = ["K", "lambda", "theta", "P0_closed", "P0_quantized", "abs_err"]


class UsageError(ConfigError):
    pass


def _versions() -> dict:
    return {"recquant": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _emit(out: Path | None, name: str, header, rows) -> None:
    rows = list(rows)
    if out is None:
        import csv
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
        return
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / name, header, rows)


def _run_chain(job: JobConfig, spec=None):
    spec = spec or job.spec
    return recursive_quantize(spec, job.levels, tol=job.tol, max_iter=job.max_iter)


def _require_merton(job: JobConfig, what: str):
    if job.merton is None:
        raise UsageError(f"{what} needs the merton model preset")
    if job.put is None or "strike" not in job.raw.get("put", {}):
        raise UsageError(f"{what} needs put.strike")


def cmd_quantize(job: JobConfig, out: Path | None) -> None:
    if out is None:
        raise UsageError("quantize needs --out")
    chain = _run_chain(job)
    meta = {"config": job.raw, "tolerances": {"tol": job.tol, "max_iter": job.max_iter},
            "versions": _versions()}
    save_chain(chain, out, meta)
    with open(out / "timings.json", "w") as fh:
        json.dump({"step_seconds": [round(t, 6) for t in chain.timings],
                   "total_seconds": round(sum(chain.timings), 6)}, fh, indent=2)
        fh.write("\n")
    if min(chain.levels[1:]) >= 3:
        rows = []
        for k in range(1, chain.n + 1):
            for left, right, val in density_estimate(chain.grids[k], chain.weights[k]):
                rows.append((k, float(left), float(right), float(val)))
        write_csv(out / "densities.csv", ["k", "left", "right", "density"], rows)


def _price_row(job: JobConfig, model: MertonModel, put: PutSpec, chain=None):
    closed = merton_put_closed_form(model, put, outer_discount=job.outer_discount)
    if chain is None:
        spec = merton_scheme(model, put, job.spec.n, job.spec.nu_level, job.spec.jump_mode)
        chain = _run_chain(job, spec)
    quant = quantized_put(chain, put)
    return [put.strike, model.intensity, model.jump_vol, closed, quant, abs(closed - quant)]


def cmd_price(job: JobConfig, out: Path | None) -> None:
    _require_merton(job, "price")
    _emit(out, "price.csv", PRICE_HEADER, [_price_row(job, job.merton, job.put)])


def cmd_table1(job: JobConfig, out: Path | None) -> None:
    if job.merton is None:
        raise UsageError("table1 needs the merton model preset")
    t = job.raw.get("table1", {})
    strikes = t.get("strikes", TABLE1_STRIKES)
    lams = t.get("intensities", TABLE1_INTENSITIES)
    thetas = t.get("jump_vols", TABLE1_JUMP_VOLS)
    base = job.put
    rows = []
    chains = {}
    for lam in lams:
        for th in thetas:
            model = MertonModel(job.merton.sigma, lam, th)
            # the chain does not depend on the strike
            put0 = PutSpec(strikes[0], base.rate, base.maturity, base.spot)
            spec = merton_scheme(model, put0, job.spec.n, job.spec.nu_level, job.spec.jump_mode)
            chains[lam, th] = _run_chain(job, spec)
    for K in strikes:
        for lam in lams:
            for th in thetas:
                put = PutSpec(K, base.rate, base.maturity, base.spot)
                rows.append(_price_row(job, MertonModel(job.merton.sigma, lam, th), put, chains[lam, th]))
    _emit(out, "table1.csv", PRICE_HEADER, rows)


def cmd_density(job: JobConfig, out: Path | None) -> None:
    chain = _run_chain(job)
    steps = job.raw.get("density", {}).get("steps", [chain.n])
    rows = []
    for k in steps:
        if not 0 <= k <= chain.n:
            raise UsageError(f"density step {k} outside [0, {chain.n}]")
        if chain.levels[k] < 3:
            raise UsageError(f"density at step {k} needs at least 3 grid points")
        for left, right, val in density_estimate(chain.grids[k], chain.weights[k]):
            rows.append((k, float(left), float(right), float(val)))
    _emit(out, "density.csv", ["k", "left", "right", "density"], rows)


def cmd_bounds(job: JobConfig, out: Path | None) -> None:
    b = job.raw.get("bounds")
    if not b:
        raise UsageError("bounds needs a 'bounds' section")
    spec = job.spec
    n = spec.n
    from .engine import expand_levels
    levels = expand_levels(job.levels, n)
    p = b.get("p", 3.0)
    pierce = b.get("pierce", 1.0)
    d = b.get("d", 1)
    cols = {}
    if all(key in b for key in ("L", "upsilon", "zeta_moment", "lipschitz", "x0_norm_p")):
        inputs = CoefficientInputs(b["L"], b["upsilon"], b["zeta_moment"], p)
        _, _, alpha, beta = key_lemma_coeffs(inputs, spec.h)
        a = np.full(n + 1, alpha)
        a[0] = b["x0_norm_p"] ** p
        be = np.full(n + 1, beta)
        lip = np.concatenate([[1.0], scheme_lipschitz(spec, b["lipschitz"])])
        coef = BoundCoefficients(p, a, be, lip, pierce=pierce, d=d,
                                 product_constant=b.get("product_constant"))
        cols["regular"] = [regular_bound(coef, levels, k) for k in range(n + 1)]
        cols["product"] = [product_bound(coef, levels, k) for k in range(n + 1)]
    if all(key in b for key in ("C0", "C1", "C2", "x0_norm_p")):
        cols["step"] = [step_bound(b["C0"], b["C1"], b["C2"], spec.T, n, b["x0_norm_p"], levels, k,
                                   p=p, pierce=pierce, d=d) for k in range(n + 1)]
    if "weak" in b:
        w = b["weak"]
        missing = [key for key in ("grad_lip", "f_lip", "C", "C_prime") if key not in w]
        if missing:
            raise UsageError(f"bounds.weak is missing {missing}")
        chain = _run_chain(job)
        params = WeakErrorParams(w["grad_lip"], w["f_lip"], w["C"], w["C_prime"], spec.h, chain.distortions)
        cols["weak"] = [weak_error_bound(params, k) for k in range(n + 1)]
    if not cols:
        raise UsageError("bounds section does not define any bound")
    names = list(cols)
    rows = [[k] + [float(cols[c][k]) for c in names] for k in range(n + 1)]
    _emit(out, "bounds.csv", ["k"] + names, rows)


def cmd_compare_mc(job: JobConfig, out: Path | None) -> None:
    mc = job.raw.get("mc", {})
    paths = mc.get("paths", 1_000_000)
    seed = mc.get("seed", 0)
    chain = _run_chain(job)
    batch = simulate_terminal(job.spec, paths, seed)
    rows = []
    m, m_se = batch.mean()
    v, v_se = batch.variance()
    for name, q, est, se in (("mean", chain.mean(), m, m_se), ("variance", chain.variance(), v, v_se)):
        rows.append([name, q, est, se, (q - est) / se if se > 0 else math.inf])
    if job.put is not None:
        price, se = mc_put(batch, job.put)
        q = quantized_put(chain, job.put)
        rows.append(["put", q, price, se, (q - price) / se if se > 0 else math.inf])
    _emit(out, "compare_mc.csv", ["quantity", "quantized", "mc", "mc_se", "z_score"], rows)


COMMANDS = {
    "quantize": cmd_quantize,
    "price": cmd_price,
    "table1": cmd_table1,
    "density": cmd_density,
    "bounds": cmd_bounds,
    "compare-mc": cmd_compare_mc,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="recquant", description="Recursive marginal quantization jobs.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cp = sub.add_parser(name)
        cp.add_argument("--config", required=True, help="JSON job configuration")
        cp.add_argument("--out", help="output directory (CSV goes to stdout when omitted)")
        cp.add_argument("--seed", type=int, help="Monte Carlo seed (u64)")
        cp.add_argument("--levels", help="grid size N or comma-separated per-step list")
        cp.add_argument("--scheme", help="scheme kind")
        cp.add_argument("--jump-mode", help="short or truncated:m")
        cp.add_argument("--nu-level", type=int, help="jump-size quantization level")
    return parser


def _fail(code: int, payload: dict, out: Path | None) -> int:
    text = json.dumps(payload, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None and code == EXIT_CONVERGENCE:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out) if args.out else None
    try:
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        overrides = {"scheme": args.scheme, "jump_mode": args.jump_mode, "nu_level": args.nu_level,
                     "seed": args.seed,
                     "levels": parse_levels(args.levels) if args.levels else None}
        job = build_job(load_raw(args.config), overrides)
        COMMANDS[args.command](job, out)
    except ConfigError as err:
        return _fail(EXIT_CONFIG, {"error": "config", "message": str(err)}, out)
    except ConvergenceError as err:
        return _fail(EXIT_CONVERGENCE, {"error": "convergence", "message": str(err), "step": err.step}, out)
    except OSError as err:
        return _fail(EXIT_IO, {"error": "io", "message": str(err)}, out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
