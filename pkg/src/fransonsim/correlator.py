"""Coincidence analysis of time-tag streams.

Exact pair counting (no FFT binning): a linear-time two-pointer sweep
collects every tag pair with |t_y - t_x| <= max_lag into symmetric lag
bins.  "Pairs" counting, not start-stop: every pair inside the lag range
contributes, which is what modern time taggers report.

Lag binning is symmetric around zero: lag bin k covers
((k - 1/2) bw, (k + 1/2) bw], boundaries resolved so that negating all
lags maps bin k to bin -k exactly (swap symmetry is bit-exact).  The
sweep reaches half a bin beyond max_lag so the outermost bins are as
fully covered as the interior ones (no half-filled edge artifacts).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit


@dataclass
class CorrelationHistogram:
    bin_width_ps: int
    max_lag_ps: int
    lags_ps: np.ndarray     # bin centers, int64 ps
    counts: np.ndarray      # uint64 per lag bin
    total_x: int
    total_y: int
    duration_ps: int
    normalization: dict | None = None

    def __post_init__(self):
        if self.bin_width_ps < 1:
            raise ValueError("bin width must be >= 1 ps")
        if self.max_lag_ps % self.bin_width_ps != 0:
            raise ValueError("max lag must be a multiple of the bin width")
        if len(self.lags_ps) != len(self.counts):
            raise ValueError("lag/count length mismatch")

    @property
    def g2(self) -> np.ndarray | None:
        return None if self.normalization is None \
            else np.asarray(self.normalization["g2"])

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["lag_ps", "count"])
            for lag, c in zip(self.lags_ps, self.counts):
                w.writerow([int(lag), int(c)])

    def to_json_dict(self) -> dict:
        d = {
            "bin_width_ps": self.bin_width_ps,
            "max_lag_ps": self.max_lag_ps,
            "lags": [int(v) for v in self.lags_ps],
            "counts": [int(v) for v in self.counts],
            "total_x": self.total_x,
            "total_y": self.total_y,
            "duration_ps": self.duration_ps,
        }
        if self.normalization is not None:
            d["g2"] = list(map(float, self.normalization["g2"]))
            d["rates"] = self.normalization["rates"]
        return d

    def write_json(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f, indent=1)


def _check_sorted(ts: np.ndarray, name: str) -> np.ndarray:
    ts = np.ascontiguousarray(ts, dtype=np.int64)
    if ts.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if ts.size > 1 and not np.all(ts[1:] >= ts[:-1]):
        raise ValueError(f"{name} tags are not sorted")
    return ts


@njit(cache=True)
def _sweep(x, y, bw, max_lag, counts, exclude_self, x_offset):
    """Two-pointer pair binning.  ``x_offset`` is the index shift of the
    x slice within the original stream (for self-pair exclusion under
    chunked processing)."""
    n_bins_half = max_lag // bw
    reach = max_lag + bw // 2  # cover the outermost bins fully
    lo = 0
    for i in range(x.size):
        t = x[i]
        while lo < y.size and y[lo] < t - reach:
            lo += 1
        j = lo
        while j < y.size and y[j] <= t + reach:
            if not (exclude_self and j == i + x_offset):
                d = y[j] - t
                if d >= 0:
                    k = (2 * d + bw) // (2 * bw)
                else:
                    k = -((-2 * d + bw) // (2 * bw))
                if -n_bins_half <= k <= n_bins_half:
                    counts[k + n_bins_half] += 1
            j += 1


def cross_correlate(x, y, bin_width_ps: int, max_lag_ps: int,
                    exclude_self: bool = False,
                    chunk_size: int | None = None) -> CorrelationHistogram:
    """Histogram of t_y - t_x over all pairs within +/- max_lag.

    ``exclude_self`` drops index-identical pairs (autocorrelation mode).
    ``chunk_size`` processes x in bounded slices (same counts regardless
    of chunking; useful to bound memory/latency on huge streams).
    """
    tx = _check_sorted(getattr(x, "timestamps", x), "x")
    ty = _check_sorted(getattr(y, "timestamps", y), "y")
    bw, max_lag = int(bin_width_ps), int(max_lag_ps)
    if bw < 1:
        raise ValueError("bin width must be >= 1 ps")
    if max_lag < bw or max_lag % bw != 0:
        raise ValueError("max lag must be a positive multiple of bin width")
    n_half = max_lag // bw
    counts = np.zeros(2 * n_half + 1, dtype=np.uint64)
    if tx.size and ty.size:
        if chunk_size is None:
            _sweep(tx, ty, bw, max_lag, counts, exclude_self, 0)
        else:
            if chunk_size < 1:
                raise ValueError("chunk size must be >= 1")
            for s in range(0, tx.size, chunk_size):
                _sweep(tx[s:s + chunk_size], ty, bw, max_lag, counts,
                       exclude_self, s)
    lags = np.arange(-n_half, n_half + 1, dtype=np.int64) * bw
    lo = min(tx[0] if tx.size else 0, ty[0] if ty.size else 0)
    hi = max(tx[-1] if tx.size else 0, ty[-1] if ty.size else 0)
    duration = int(hi - lo) + bw if (tx.size or ty.size) else 0
    return CorrelationHistogram(bw, max_lag, lags, counts,
                                int(tx.size), int(ty.size), duration)


def cross_correlate_naive(x, y, bin_width_ps: int, max_lag_ps: int,
                          exclude_self: bool = False) -> CorrelationHistogram:
    """O(n^2) double-loop reference; bit-identical to the sweep."""
    tx = _check_sorted(getattr(x, "timestamps", x), "x")
    ty = _check_sorted(getattr(y, "timestamps", y), "y")
    bw, max_lag = int(bin_width_ps), int(max_lag_ps)
    n_half = max_lag // bw
    counts = np.zeros(2 * n_half + 1, dtype=np.uint64)
    for i in range(tx.size):
        for j in range(ty.size):
            if exclude_self and i == j:
                continue
            d = int(ty[j]) - int(tx[i])
            if abs(d) > max_lag + bw // 2:
                continue
            if d >= 0:
                k = (2 * d + bw) // (2 * bw)
            else:
                k = -((-2 * d + bw) // (2 * bw))
            if -n_half <= k <= n_half:
                counts[k + n_half] += 1
    lags = np.arange(-n_half, n_half + 1, dtype=np.int64) * bw
    lo = min(tx[0] if tx.size else 0, ty[0] if ty.size else 0)
    hi = max(tx[-1] if tx.size else 0, ty[-1] if ty.size else 0)
    duration = int(hi - lo) + bw if (tx.size or ty.size) else 0
    return CorrelationHistogram(bw, max_lag, lags, counts,
                                int(tx.size), int(ty.size), duration)


def autocorrelate(x, bin_width_ps: int, max_lag_ps: int,
                  chunk_size: int | None = None) -> CorrelationHistogram:
    """Self-correlation excluding the trivial zero-lag self-pairs."""
    return cross_correlate(x, x, bin_width_ps, max_lag_ps,
                           exclude_self=True, chunk_size=chunk_size)


def normalize_g2(h: CorrelationHistogram,
                 duration_ps: int | None = None) -> CorrelationHistogram:
    """Attach g2(lag) = counts / (r1 r2 T bw); the far-lag plateau of
    uncorrelated streams then sits at 1."""
    t_ps = int(duration_ps if duration_ps is not None else h.duration_ps)
    if t_ps <= 0:
        raise ValueError("nonpositive acquisition duration")
    if h.total_x == 0 or h.total_y == 0:
        raise ValueError("cannot normalize with an empty stream")
    r1 = h.total_x / t_ps
    r2 = h.total_y / t_ps
    expected = r1 * r2 * t_ps * h.bin_width_ps
    g2 = h.counts.astype(np.float64) / expected
    h.normalization = {
        "g2": g2,
        "rates": {"r1_per_ps": r1, "r2_per_ps": r2,
                  "duration_ps": t_ps, "expected_per_bin": expected},
    }
    return h


def coincidences_at(x, y, lag_ps: int, window_ps: int) -> int:
    """Pairs with |(t_y - t_x) - lag| <= window/2 (inclusive)."""
    tx = _check_sorted(getattr(x, "timestamps", x), "x")
    ty = _check_sorted(getattr(y, "timestamps", y), "y")
    if window_ps < 1:
        raise ValueError("window must be >= 1 ps")
    if tx.size == 0 or ty.size == 0:
        return 0
    half = int(window_ps) // 2
    lo = np.searchsorted(ty, tx + int(lag_ps) - half, side="left")
    hi = np.searchsorted(ty, tx + int(lag_ps) + half, side="right")
    return int(np.sum(hi - lo))


def chsh_counts(settings_runs: dict, lag_ps: int = 0,
                window_ps: int | None = None, tau_ps: int = 1070) -> dict:
    """Assemble the 16 CHSH coincidence counts from per-setting runs.

    ``settings_runs[(phi_a, phi_b)]`` maps to a {channel: stream} dict;
    default coincidence window is tau/4 (peaks are tau-separated, so any
    window below tau/2 is unambiguous)."""
    if window_ps is None:
        window_ps = tau_ps // 4
    out = {}
    for setting, chans in settings_runs.items():
        per = {}
        for da in ("A1", "A2"):
            for db in ("B1", "B2"):
                per[(da, db)] = coincidences_at(chans[da], chans[db],
                                                lag_ps, window_ps)
        out[setting] = per
    return out
