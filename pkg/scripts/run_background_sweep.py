#!/usr/bin/env python3
"""S versus laser-background sweep: as the coherent background fraction
beta grows, g2(0) of the source rises and the Bell parameter falls
through the classical bound S = 2."""

import argparse
from pathlib import Path

import numpy as np

from fransonsim.pipeline import Experiment, run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-o", "--out", default="out/sweep", type=Path)
    ap.add_argument("--q", type=float, default=0.05)
    ap.add_argument("--beta-max", type=float, default=0.8)
    ap.add_argument("--n-beta", type=int, default=17)
    args = ap.parse_args()
    betas = list(np.linspace(0.0, args.beta_max, args.n_beta))
    results = run(Experiment(kind="background_sweep", out_dir=args.out,
                             params={"q": args.q, "beta_grid": betas}))
    print(f"{'beta':>6} {'g2(0)':>8} {'S':>8}")
    for r in results["rows"]:
        print(f"{r['beta']:6.3f} {r['g2_0']:8.4f} {r['S']:8.4f}")
    cross = results["crossover"]
    if cross:
        print(f"S = 2 crossover: beta = {cross['beta']:.3f}, "
              f"g2(0) = {cross['g2_0']:.3f}")
    print(f"artifacts in {args.out}/")


if __name__ == "__main__":
    main()
