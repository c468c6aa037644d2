"""Exact correlation observables for the Franson experiment.

All rates here come from the Fock engine: a window of emission bins is
pushed through the full network and detector-pattern probabilities are
read off.  Rates are per-window joint click probabilities (arbitrary but
mutually consistent units).
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .fock import (FockBasis, FockState, amplitude_oracle, anc, apply_network,
                   detection_probability, make_basis, number_correlation, ph)
from .interferometer import FransonConfig, build_amzi, build_franson
from .source import SourceParams, background_alpha, bin_amplitudes, g2_source

DETECTOR_PAIRS = (("A1", "B1"), ("A1", "B2"), ("A2", "B1"), ("A2", "B2"))
CHSH_SETTINGS = ((0.0, math.pi / 2), (math.pi / 4, 3 * math.pi / 4))


@dataclass
class CorrelationMap:
    phi_a: np.ndarray
    dt: np.ndarray          # units of tau
    values: np.ndarray      # shape (len(dt), len(phi_a))
    phi_b: float
    q: float
    beta: float
    normalization: str      # "max" or "baseline"

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["phi_a", "dt", "value"])
            for i, dt in enumerate(self.dt):
                for j, phi in enumerate(self.phi_a):
                    w.writerow([f"{phi:.10g}", f"{dt:.10g}",
                                f"{self.values[i, j]:.12g}"])

    def to_json_dict(self) -> dict:
        return {
            "phi_a": list(map(float, self.phi_a)),
            "dt": list(map(float, self.dt)),
            "values": self.values.tolist(),
            "phi_b": self.phi_b,
            "q": self.q,
            "beta": self.beta,
            "normalization": self.normalization,
        }


@dataclass
class FringeFit:
    n1: float
    n2: float
    visibility: float
    visibility_err: float
    phase_offset: float
    covariance: np.ndarray


@dataclass
class ChshResult:
    e_values: dict
    e_errors: dict
    s: float
    sigma_s: float
    settings: tuple
    counts: dict

    def to_json_dict(self) -> dict:
        return {
            "settings": {"phi_a": list(self.settings[0]),
                         "phi_b": list(self.settings[1])},
            "E": {f"{a:.6f},{b:.6f}": {"value": v,
                                       "sigma": self.e_errors[(a, b)]}
                  for (a, b), v in self.e_values.items()},
            "S": self.s,
            "sigma_S": self.sigma_s,
            "counts": {f"{a:.6f},{b:.6f}": {f"{dA},{dB}": n
                                            for (dA, dB), n in per.items()}
                       for (a, b), per in self.counts.items()},
        }


def _window_state(q: float, beta: float, n_bins: int, basis: FockBasis,
                  thetas: Sequence[float] | None = None) -> FockState:
    """Product emission state over ``n_bins`` source bins (plus vacuum on
    all auxiliary inputs), background folded into each bin."""
    if thetas is None:
        thetas = [0.0] * n_bins
    alpha = background_alpha(q, beta) if beta else 0j
    per_bin_cap = 1 if beta == 0.0 else min(basis.n_max, 2)
    bins = [bin_amplitudes(q, thetas[t], alpha, n_max=per_bin_cap)
            for t in range(n_bins)]
    idx_s = [basis.index[ph("S", t)] for t in range(n_bins)]
    idx_a = [basis.index[anc("em", t)] for t in range(n_bins)]
    terms: dict[tuple[int, ...], complex] = {}
    zero = [0] * len(basis.modes)
    for combo in itertools.product(*(b.items() for b in bins)):
        occ = list(zero)
        amp = 1.0 + 0j
        for t, ((n, e), a) in enumerate(combo):
            occ[idx_s[t]] = n
            occ[idx_a[t]] = e
            amp *= a
        terms[tuple(occ)] = amp
    return FockState(basis, terms)


def _franson_output(q: float, beta: float, phi_a: float, phi_b: float,
                    n_bins: int, n_max: int | None = None) -> FockState:
    if n_max is None:
        n_max = n_bins * (1 if beta == 0.0 else 2)
    cfg = FransonConfig(phi_a=phi_a, phi_b=phi_b, n_bins=n_bins)
    net = build_franson(cfg)
    modes = list(net.in_labels) + [anc("em", t) for t in range(n_bins)]
    basis = make_basis(modes, n_max)
    state = _window_state(q, beta, n_bins, basis)
    return apply_network(state, net)


def _lag_window(lag: int) -> tuple[int, int, int]:
    """Emission-window geometry for one integer-bin lag.

    Returns (n_bins, t_a, t_b).  Each lag uses the minimal emission
    window that contains all interfering paths of *that* peak: the
    central peak and the side peaks involve a single delocalized pair
    (two emission bins); the baseline at |lag| >= 2 needs |lag| + 2 bins
    so both clicks sit at interior output bins where short and long
    paths overlap.  A continuous stream adds neighbor-bin coherence
    corrections of relative order q on top of these isolated-pair rates;
    the Monte Carlo stream includes them, these analytics do not.
    """
    if abs(lag) <= 1:
        n_bins = 2
        t_a = 1 if lag >= 0 else 2
    else:
        n_bins = abs(lag) + 2
        t_a = 1 + max(0, -lag)
    return n_bins, t_a, t_a + lag


def coincidence_rate(q: float, beta: float, phi_a: float, phi_b: float,
                     lag: int = 0, pair: tuple[str, str] = ("A1", "B1"),
                     n_max: int | None = None,
                     semantics: str = "flux") -> float:
    """Exact coincidence rate at integer-bin lag.

    lag 0 is the central two-photon interference peak; lag +/-1 the
    phase-independent side peaks; |lag| >= 2 the first-order-coherence
    baseline.  ``semantics`` selects the detector model: "flux" is the
    photon-number correlation <n_A n_B> (linear detectors at low flux),
    "threshold" the joint click probability of click/no-click detectors.
    """
    n_bins, t_a, t_b = _lag_window(lag)
    out = _franson_output(q, beta, phi_a, phi_b, n_bins, n_max)
    det_a, det_b = pair
    if det_a not in ("A1", "A2") or det_b not in ("B1", "B2"):
        raise ValueError(f"unknown detector pair {pair}")
    mode_a, mode_b = ph(det_a, t_a), ph(det_b, t_b)
    if semantics == "flux":
        return number_correlation(out, [mode_a, mode_b])
    if semantics == "threshold":
        return detection_probability(out, {mode_a: True, mode_b: True})
    raise ValueError(f"unknown semantics {semantics!r}")


def coincidence_rate_fast(q: float, phi_a: float, phi_b: float,
                          pair: tuple[str, str] = ("A1", "B1")) -> float:
    """Exact lag-0 rate via the permanent oracle (beta = 0 only).

    With no background the central peak is carried entirely by the
    double-emission branch |1,1> (weight q/2 per bin, both ancillas in
    g), and a two-photon flux coincidence fixes the full output
    occupation, so one transition amplitude suffices.  Orders of
    magnitude faster than :func:`coincidence_rate`; used for dense
    setting scans.  The two routes agree to machine precision (tested).
    """
    det_a, det_b = pair
    if det_a not in ("A1", "A2") or det_b not in ("B1", "B2"):
        raise ValueError(f"unknown detector pair {pair}")
    net = build_franson(FransonConfig(phi_a=phi_a, phi_b=phi_b, n_bins=2))
    in_occ = [0] * len(net.in_labels)
    pos_in = {lab: i for i, lab in enumerate(net.in_labels)}
    in_occ[pos_in[ph("S", 0)]] = 1
    in_occ[pos_in[ph("S", 1)]] = 1
    out_occ = [0] * len(net.out_labels)
    pos_out = {lab: i for i, lab in enumerate(net.out_labels)}
    out_occ[pos_out[ph(det_a, 1)]] = 1
    out_occ[pos_out[ph(det_b, 1)]] = 1
    amp = amplitude_oracle(net, in_occ, out_occ)
    return (q / 2.0) ** 2 * abs(amp) ** 2


def singles_rate(q: float, beta: float, phi: float, side: str = "A",
                 port: int = 1, semantics: str = "flux") -> float:
    """Exact single-detector rate at an interior bin after one analyzer
    fed directly by the source (no FBS)."""
    net = build_amzi(phi, side, 2,
                     input_labels=[ph("S", t) for t in range(2)])
    n_max = 2 * (1 if beta == 0.0 else 2)
    modes = list(net.in_labels) + [anc("em", t) for t in range(2)]
    basis = make_basis(modes, n_max)
    state = _window_state(q, beta, 2, basis)
    out = apply_network(state, net)
    mode = ph(f"{side}{port}", 1)
    if semantics == "flux":
        return number_correlation(out, [mode])
    if semantics == "threshold":
        return detection_probability(out, {mode: True})
    raise ValueError(f"unknown semantics {semantics!r}")


def franson_singles_rate(q: float, beta: float, phi_a: float, phi_b: float,
                         detector: str = "A1",
                         semantics: str = "threshold") -> float:
    """Single-detector rate at an interior bin of the full Franson
    network (what a tag stream's per-bin count rate converges to, hence
    the threshold default)."""
    out = _franson_output(q, beta, phi_a, phi_b, 2)
    mode = ph(detector, 1)
    if semantics == "flux":
        return number_correlation(out, [mode])
    return detection_probability(out, {mode: True})


def g2_map(phi_a_grid: Sequence[float], phi_b: float, q: float,
           beta: float = 0.0, lags: Sequence[int] = (-2, -1, 0, 1, 2),
           normalization: str = "max") -> CorrelationMap:
    """Coincidence map over (phi_A, integer lag) for fixed phi_B."""
    phi_a_grid = np.asarray(list(phi_a_grid), dtype=float)
    if phi_a_grid.size == 0:
        raise ValueError("empty phase grid")
    values = np.zeros((len(lags), len(phi_a_grid)))
    for i, lag in enumerate(lags):
        for j, phi in enumerate(phi_a_grid):
            values[i, j] = coincidence_rate(q, beta, phi, phi_b, lag=lag)
    if normalization == "max":
        peak = values.max()
        if peak > 0:
            values = values / peak
    elif normalization == "baseline":
        base = np.mean([values[i] for i, l in enumerate(lags) if abs(l) >= 2],
                       axis=0)
        values = values / np.where(base > 0, base, 1.0)
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    return CorrelationMap(phi_a_grid, np.asarray(lags, dtype=float), values,
                          phi_b, q, beta, normalization)


def render_fine(cmap: CorrelationMap, t1: float, tau: float,
                n_sub: int = 21) -> CorrelationMap:
    """Display-only fine-lag rendering: integer-lag weights convolved
    with the two-sided exponential wavepacket envelope e^{-|t|/T1}."""
    dt_fine = np.linspace(cmap.dt.min() - 0.5, cmap.dt.max() + 0.5,
                          n_sub * len(cmap.dt))
    vals = np.zeros((dt_fine.size, cmap.phi_a.size))
    for i, lag in enumerate(cmap.dt):
        env = np.exp(-np.abs((dt_fine - lag) * tau) / t1)
        vals += env[:, None] * cmap.values[i][None, :]
    peak = vals.max()
    if peak > 0:
        vals /= peak
    return CorrelationMap(cmap.phi_a, dt_fine, vals, cmap.phi_b, cmap.q,
                          cmap.beta, cmap.normalization + "+envelope")


def fit_fringe(points: Sequence[tuple[float, float]], phi_b: float) -> FringeFit:
    """Least-squares fit of N1 [1 + cos(phi_A - phi_B)] + N2.

    Visibility V = N1 / (N1 + N2) with its standard error from the fit
    covariance (unweighted residual variance).
    """
    pts = list(points)
    if len(pts) < 5:
        raise ValueError("need at least 5 points")
    phis = np.array([p[0] for p in pts], dtype=float)
    ys = np.array([p[1] for p in pts], dtype=float)
    if phis.max() - phis.min() < 2 * math.pi - 1e-9:
        raise ValueError("points must span at least one full period")
    x = np.column_stack([1.0 + np.cos(phis - phi_b), np.ones_like(phis)])
    gram = x.T @ x
    if np.linalg.cond(gram) > 1e12:
        raise ValueError("degenerate fringe fit")
    coef, *_ = np.linalg.lstsq(x, ys, rcond=None)
    n1, n2 = float(coef[0]), float(coef[1])
    resid = ys - x @ coef
    dof = max(len(pts) - 2, 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(gram)
    denom = n1 + n2
    if denom == 0:
        raise ValueError("degenerate fringe fit (zero mean count)")
    v = n1 / denom
    grad = np.array([n2, -n1]) / denom ** 2
    v_err = float(np.sqrt(grad @ cov @ grad))
    return FringeFit(n1, n2, v, v_err, phi_b, cov)


def chsh(counts: Mapping[tuple[float, float], Mapping[tuple[str, str], float]],
         settings: tuple = CHSH_SETTINGS) -> ChshResult:
    """CHSH S from 16 coincidence counts.

    ``counts[(phi_a, phi_b)][(dA, dB)]`` holds the delta-t = 0 count for
    the four detector-pair combinations; ports 2 realize the pi-shifted
    (perpendicular) settings.  Errors assume independent Poisson counts.
    """
    (a, a2), (b, b2) = settings
    e_values: dict = {}
    e_errors: dict = {}
    used: dict = {}
    for sa, sb in itertools.product((a, a2), (b, b2)):
        per = counts[(sa, sb)]
        n_pp = float(per[("A1", "B1")])
        n_mm = float(per[("A2", "B2")])
        n_mp = float(per[("A2", "B1")])
        n_pm = float(per[("A1", "B2")])
        total = n_pp + n_mm + n_mp + n_pm
        if total <= 0:
            raise ValueError(f"all-zero counts for setting ({sa}, {sb})")
        diff = n_pp + n_mm - n_mp - n_pm
        e = diff / total
        var = 0.0
        for n, sgn in ((n_pp, 1), (n_mm, 1), (n_mp, -1), (n_pm, -1)):
            var += ((sgn * total - diff) / total ** 2) ** 2 * n
        e_values[(sa, sb)] = e
        e_errors[(sa, sb)] = math.sqrt(var)
        used[(sa, sb)] = dict(per)
    s = abs(e_values[(a, b)] - e_values[(a, b2)]
            + e_values[(a2, b)] + e_values[(a2, b2)])
    sigma_s = math.sqrt(sum(e_errors[k] ** 2 for k in e_values))
    return ChshResult(e_values, e_errors, s, sigma_s, settings, used)


def ideal_counts(settings: tuple = CHSH_SETTINGS, visibility: float = 1.0,
                 scale: float = 1e6) -> dict:
    """Synthetic noiseless counts N ~ 1 + V cos(phi_A - phi_B), ports 2
    pi-shifted."""
    (a, a2), (b, b2) = settings
    out = {}
    for sa, sb in itertools.product((a, a2), (b, b2)):
        per = {}
        for (dA, dB) in DETECTOR_PAIRS:
            pa = sa + (math.pi if dA == "A2" else 0.0)
            pb = sb + (math.pi if dB == "B2" else 0.0)
            per[(dA, dB)] = scale * (1.0 + visibility * math.cos(pa - pb))
        out[(sa, sb)] = per
    return out


def exact_chsh(q: float, beta: float = 0.0,
               settings: tuple = CHSH_SETTINGS, scale: float = 1e8
               ) -> ChshResult:
    """CHSH from exact model rates (rates scaled into pseudo-counts)."""
    (a, a2), (b, b2) = settings
    counts = {}
    for sa, sb in itertools.product((a, a2), (b, b2)):
        per = {}
        for pair in DETECTOR_PAIRS:
            per[pair] = scale * coincidence_rate(q, beta, sa, sb,
                                                 lag=0, pair=pair)
        counts[(sa, sb)] = per
    return chsh(counts, settings)


def baseline_visibilities(q: float, beta: float = 0.0, lag: int = 2
                          ) -> tuple[float, float]:
    """Per-side fringe visibilities extracted from the factorized
    baseline: V_side = (R_max - R_min)/(R_max + R_min) at fixed other
    phase."""
    r00 = coincidence_rate(q, beta, 0.0, 0.0, lag=lag)
    rp0 = coincidence_rate(q, beta, math.pi, 0.0, lag=lag)
    r0p = coincidence_rate(q, beta, 0.0, math.pi, lag=lag)
    v_a = (r00 - rp0) / (r00 + rp0)
    v_b = (r00 - r0p) / (r00 + r0p)
    return v_a, v_b


def baseline_factorization_residual(q: float, beta: float = 0.0,
                                    grid: int = 5, lag: int = 2) -> float:
    """Max relative deviation of the exact baseline from
    K (1 + V_A cos phi_A)(1 + V_B cos phi_B)."""
    v_a, v_b = baseline_visibilities(q, beta, lag)
    phis = np.linspace(0.0, 2 * math.pi, grid, endpoint=False)
    r_ref = coincidence_rate(q, beta, 0.0, 0.0, lag=lag)
    k = r_ref / ((1 + v_a) * (1 + v_b))
    worst = 0.0
    for pa in phis:
        for pb in phis:
            r = coincidence_rate(q, beta, pa, pb, lag=lag)
            model = k * (1 + v_a * math.cos(pa)) * (1 + v_b * math.cos(pb))
            worst = max(worst, abs(r - model) / r_ref)
    return worst


def superbunching_ratio(q: float, beta: float = 0.0) -> float:
    """Baseline-normalized lag-0 coincidence at (pi, pi)."""
    c0 = coincidence_rate(q, beta, math.pi, math.pi, lag=0)
    base = coincidence_rate(q, beta, math.pi, math.pi, lag=2)
    return c0 / base


def source_g2_zero(q: float, beta: float, n_max: int = 3) -> float:
    """Exact single-bin HBT g2(0) of the background-admixed source."""
    modes = [ph("S", 0), anc("em", 0)]
    basis = make_basis(modes, n_max)
    alpha = background_alpha(q, beta) if beta else 0j
    amps = bin_amplitudes(q, 0.0, alpha, n_max=n_max)
    terms = {}
    for (n, e), a in amps.items():
        terms[(n, e)] = a
    state = FockState(basis, terms)
    m1, m2 = state.photon_moments(ph("S", 0))
    if m1 == 0:
        return 0.0
    return m2 / m1 ** 2


def s_vs_background(betas: Sequence[float], q: float
                    ) -> list[dict]:
    """Exact (beta, g2(0), S) sweep; anchors for the published pump-power
    study are compared at the pipeline level."""
    rows = []
    for beta in betas:
        if not 0.0 <= beta < 1.0:
            raise ValueError("beta grid must lie in [0, 1)")
        res = exact_chsh(q, beta)
        rows.append({"beta": float(beta),
                     "g2_0": source_g2_zero(q, beta),
                     "S": res.s})
    return rows


def s_crossover(rows: Sequence[dict], threshold: float = 2.0) -> dict | None:
    """Linear interpolation of the beta where S crosses the threshold."""
    for lo, hi in zip(rows, rows[1:]):
        if (lo["S"] - threshold) * (hi["S"] - threshold) <= 0 and lo["S"] != hi["S"]:
            f = (lo["S"] - threshold) / (lo["S"] - hi["S"])
            return {
                "beta": lo["beta"] + f * (hi["beta"] - lo["beta"]),
                "g2_0": lo["g2_0"] + f * (hi["g2_0"] - lo["g2_0"]),
                "S": threshold,
            }
    return None
