#!/usr/bin/env python3
"""Multiport extension: probability of post-selecting one photon per
output of a symmetric n-port splitter fed with one photon per input,
which scales as n!/n^n."""

import argparse
from pathlib import Path

from fransonsim.pipeline import Experiment, run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-o", "--out", default="out/multiport", type=Path)
    ap.add_argument("--n", type=int, nargs="+", default=[2, 3, 4])
    args = ap.parse_args()
    results = run(Experiment(kind="multiport_postselect", out_dir=args.out,
                             params={"n_grid": args.n}))
    print(f"{'n':>3} {'probability':>14} {'n!/n^n':>14}")
    for r in results["rows"]:
        print(f"{r['n']:3d} {r['probability']:14.9f} {r['ideal']:14.9f}")
    print(f"artifacts in {args.out}/")


if __name__ == "__main__":
    main()
