"""Terminal density estimates of the Merton chain for varying lambda and theta.

Writes one density CSV per parameter set plus summary.csv holding the
terminal mean and variance of each chain.
"""

import argparse
from pathlib import Path

from recquant import MertonModel, PutSpec, density_estimate, merton_scheme, recursive_quantize
from recquant.chain_io import write_csv

BY_INTENSITY = [(1.0, 0.04), (5.0, 0.04), (10.0, 0.04)]
BY_JUMP_VOL = [(5.0, 0.01), (5.0, 0.04), (5.0, 0.06)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/figures")
    ap.add_argument("--sigma", type=float, default=0.108)
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--levels", type=int, default=70)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    put = PutSpec(100.0, 0.08, 0.5, 100.0)
    summary = []
    for figure, cases in (("intensity", BY_INTENSITY), ("jump_vol", BY_JUMP_VOL)):
        for lam, th in cases:
            spec = merton_scheme(MertonModel(args.sigma, lam, th), put, args.n)
            chain = recursive_quantize(spec, args.levels)
            x, p = chain.terminal
            dens = density_estimate(chain.grids[-1], p)
            write_csv(out / f"density_{figure}_lambda{lam:g}_theta{th:g}.csv",
                      ["left", "right", "density"], [tuple(map(float, r)) for r in dens])
            summary.append([figure, lam, th, chain.mean(), chain.variance()])
            print(f"{figure:9s} lambda={lam:<4g} theta={th:<5g} mean={chain.mean():.4f} var={chain.variance():.4f}")
    write_csv(out / "summary.csv", ["sweep", "lambda", "theta", "mean", "variance"], summary)


if __name__ == "__main__":
    main()
