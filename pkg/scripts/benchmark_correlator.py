#!/usr/bin/env python3
"""Correlator throughput benchmark on synthetic Poisson tag streams."""

import argparse
import time

import numpy as np

from fransonsim.correlator import cross_correlate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tags", type=int, default=2_000_000,
                    help="approximate tags per stream")
    ap.add_argument("--rate-per-ps", type=float, default=1e-4,
                    help="tag density (sets pair multiplicity per bin)")
    ap.add_argument("--bin", type=int, default=100, help="bin width, ps")
    ap.add_argument("--max-lag", type=int, default=10_000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    duration = int(args.tags / args.rate_per_ps)
    x = np.sort(rng.integers(0, duration, size=args.tags, dtype=np.int64))
    y = np.sort(rng.integers(0, duration, size=args.tags, dtype=np.int64))

    cross_correlate(x[:1000], y[:1000], args.bin, args.max_lag)  # warm JIT
    best = float("inf")
    for _ in range(args.repeats):
        t0 = time.perf_counter()
        h = cross_correlate(x, y, args.bin, args.max_lag)
        best = min(best, time.perf_counter() - t0)
    total = x.size + y.size
    print(f"{total} tags, {int(h.counts.sum())} pairs in {best:.3f} s "
          f"-> {total / best / 1e6:.1f} M tags/s/core")


if __name__ == "__main__":
    main()
