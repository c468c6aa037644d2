"""Acceptance suite: one test per release criterion.

Each test prints a single PASS/FAIL line (run with ``pytest -s`` to see
them inline; they also appear in captured output) and then asserts, so a
red criterion is both visible and fails the suite.
"""

import itertools
import math
import time

import numpy as np
import pytest

from fransonsim.analytics import (CHSH_SETTINGS, DETECTOR_PAIRS,
                                  baseline_factorization_residual,
                                  baseline_visibilities, chsh,
                                  coincidence_rate, coincidence_rate_fast,
                                  exact_chsh, ideal_counts, s_vs_background,
                                  superbunching_ratio)
from fransonsim.correlator import (cross_correlate, cross_correlate_naive,
                                   normalize_g2)
from fransonsim.fock import (FockState, ModeNetwork, amplitude_oracle,
                             apply_network, make_basis, ph)
from fransonsim.interferometer import (FransonConfig,
                                       multiport_postselect_probability)
from fransonsim.montecarlo import RunConfig, generate
from fransonsim.pipeline import compare_to_anchor
from fransonsim.source import SourceParams, power_calibration

Q = 0.1


def report(number: int, name: str, ok: bool, detail: str):
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {number:2d}] {name}: {status} ({detail})")


def random_unitary(n, rng):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_criterion_01_oracle_equivalence():
    rng = np.random.default_rng(2026)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        n_ph = int(rng.integers(1, 4))
        u = random_unitary(n, rng)
        ins = [ph(f"i{k}") for k in range(n)]
        outs = [ph(f"o{k}") for k in range(n)]
        net = ModeNetwork(tuple(ins), tuple(outs), u)
        occ = [0] * n
        for _ in range(n_ph):
            occ[rng.integers(n)] += 1
        basis = make_basis(ins, n_ph)
        out = apply_network(FockState(basis, {tuple(occ): 1.0}), net)
        for out_occ, ampl in out.terms.items():
            worst = max(worst, abs(ampl - amplitude_oracle(net, occ, out_occ)))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and elapsed < 30.0
    report(1, "evolution vs permanent oracle", ok,
           f"100 unitaries, max amplitude error {worst:.2e}, {elapsed:.1f} s")
    assert worst < 1e-10
    assert elapsed < 30.0


def test_criterion_02_central_peak_shape():
    deltas = 2 * math.pi * np.arange(24) / 24
    rates = np.array([coincidence_rate(Q, 0.0, d, 0.0, lag=0)
                      for d in deltas])
    model = 1.0 + np.cos(deltas)
    k_fit = float(model @ rates / (model @ model))
    resid = float(np.max(np.abs(rates - k_fit * model)) / rates.max())
    null = coincidence_rate(Q, 0.0, math.pi, 0.0, lag=0)
    peak = rates.max()
    k_expected = Q ** 2 / 128
    ok = resid < 1e-10 and null < 1e-12 * peak
    report(2, "lag-0 rate is K[1 + cos(phiA - phiB)]", ok,
           f"rel residual {resid:.2e}, null/peak {null / peak:.2e}; "
           f"K = {k_fit:.6e} vs p1^2/128 = {k_expected:.6e} (report-only)")
    assert resid < 1e-10
    assert null < 1e-12 * peak


def test_criterion_03_side_peak_phase_independence():
    grid = np.linspace(0.0, 2 * math.pi, 9)
    worst = 0.0
    for lag in (1, -1):
        ref = coincidence_rate(Q, 0.0, 0.0, 0.0, lag=lag)
        for pa, pb in itertools.chain(((p, 0.7) for p in grid),
                                      ((0.7, p) for p in grid)):
            r = coincidence_rate(Q, 0.0, pa, pb, lag=lag)
            worst = max(worst, abs(r - ref) / ref)
    ok = worst < 1e-12
    report(3, "side peaks independent of both phases", ok,
           f"max relative variation {worst:.2e} over 2 pi scans")
    assert worst < 1e-12


def test_criterion_04_baseline_law_and_superbunching():
    v_a, v_b = baseline_visibilities(Q)
    v_err = max(abs(v_a - (1 - Q)), abs(v_b - (1 - Q)))
    resid = baseline_factorization_residual(Q, grid=5)
    bunching = superbunching_ratio(Q)
    ok = v_err < 1e-9 and resid < 1e-9 and bunching > 1.0
    report(4, "baseline factorizes with V = 1 - q; superbunching", ok,
           f"|V - (1-q)| {v_err:.2e}, factorization residual {resid:.2e}, "
           f"g2(pi,pi)/baseline = {bunching:.1f}")
    assert v_err < 1e-9
    assert resid < 1e-9
    assert bunching > 1.0


def test_criterion_05_ideal_chsh_and_tsirelson():
    res = exact_chsh(Q)
    s_err = abs(res.s - 2 * math.sqrt(2))
    rng = np.random.default_rng(5)
    worst_s = 0.0
    for _ in range(1000):
        a, a2, b, b2 = rng.uniform(0, 2 * math.pi, 4)
        counts = {}
        for sa, sb in itertools.product((a, a2), (b, b2)):
            counts[(sa, sb)] = {
                pair: 1e9 * coincidence_rate_fast(Q, sa, sb, pair)
                for pair in DETECTOR_PAIRS}
        worst_s = max(worst_s, chsh(counts, ((a, a2), (b, b2))).s)
    ok = s_err < 1e-6 and worst_s <= 2 * math.sqrt(2) + 1e-9
    report(5, "ideal CHSH hits 2 sqrt(2); Tsirelson never exceeded", ok,
           f"|S - 2 sqrt 2| = {s_err:.2e} at settings "
           f"{{0, pi/2}} x {{pi/4, 3pi/4}}; max S over 1000 random "
           f"quadruples = {worst_s:.9f}")
    assert s_err < 1e-6
    assert worst_s <= 2 * math.sqrt(2) + 1e-9


def test_criterion_06_visibility_to_s_and_background_table():
    res = chsh(ideal_counts(visibility=0.928))
    s_err = abs(res.s - 2.624)
    row = compare_to_anchor(res.s, 2 * math.sqrt(2) * 0.026, "chsh_s")
    betas = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
    rows = s_vs_background(betas, 0.05)
    svals = [r["S"] for r in rows]
    decreasing = all(b < a for a, b in zip(svals, svals[1:]))
    s0 = abs(svals[0] - 2 * math.sqrt(2))
    ok = (s_err < 1e-3 and row["status"] == "match"
          and decreasing and s0 < 1e-6)
    table = "; ".join(f"beta={r['beta']:.1f} g2={r['g2_0']:.3f} "
                      f"S={r['S']:.3f}" for r in rows)
    report(6, "V = 0.928 gives S = 2.624; S(beta) strictly decreasing", ok,
           f"S = {res.s:.4f} ({row['status']} vs 2.675 +/- 0.050); "
           f"published crossover anchors (beta 0.43, g2 ~0.2, S 2.0) "
           f"report-only; table: {table}")
    assert s_err < 1e-3
    assert row["status"] == "match"
    assert decreasing
    assert s0 < 1e-6


def test_criterion_07_monte_carlo_chsh():
    t0 = time.perf_counter()
    duration = 1.07e-2  # 1e7 bins per run at tau = 1.07 ns
    (a, a2), (b, b2) = CHSH_SETTINGS
    counts = {}
    seed = 20_260_800
    from fransonsim.correlator import coincidences_at
    for sa, sb in itertools.product((a, a2), (b, b2)):
        per = {}
        for pair in DETECTOR_PAIRS:
            cfg = RunConfig(duration=duration, seed=seed,
                            source=SourceParams(q=Q),
                            franson=FransonConfig(phi_a=sa, phi_b=sb))
            seed += 1
            streams, _ = generate(cfg)
            per[pair] = coincidences_at(streams[pair[0]], streams[pair[1]],
                                        0, 267)
        counts[(sa, sb)] = per
    res = chsh(counts)
    elapsed = time.perf_counter() - t0
    s_ref = exact_chsh(Q).s
    pull = abs(res.s - s_ref) / res.sigma_s
    n_bins = int(round(duration / 1.07e-9))
    ok = pull <= 3.0 and elapsed < 600.0 and n_bins >= 10 ** 7
    report(7, "16-run Monte-Carlo CHSH matches analytics", ok,
           f"S = {res.s:.4f} +/- {res.sigma_s:.4f} vs analytic "
           f"{s_ref:.4f} ({pull:.2f} sigma), {n_bins:.0e} bins/run, "
           f"{elapsed:.0f} s")
    assert n_bins >= 10 ** 7
    assert pull <= 3.0
    assert elapsed < 600.0


def test_criterion_08_correlator_exactness_and_statistics():
    rng = np.random.default_rng(8)
    dur = 3_000_000
    x = np.sort(rng.integers(0, dur, size=3000, dtype=np.int64))
    y = np.sort(rng.integers(0, dur, size=3000, dtype=np.int64))
    fast = cross_correlate(x, y, 100, 5000)
    slow = cross_correlate_naive(x, y, 100, 5000)
    identical = bool(np.array_equal(fast.counts, slow.counts))

    big = 20_000_000
    r = 1e-3
    xs = np.sort(rng.integers(0, big, size=rng.poisson(r * big),
                              dtype=np.int64))
    ys = np.sort(rng.integers(0, big, size=rng.poisson(r * big),
                              dtype=np.int64))
    h = normalize_g2(cross_correlate(xs, ys, 100, 5000), duration_ps=big)
    expected = h.normalization["rates"]["expected_per_bin"]
    sigma = 1.0 / math.sqrt(expected)
    flat = bool(np.all(np.abs(h.g2 - 1.0) <= 4 * sigma))

    t0 = time.perf_counter()
    cross_correlate(xs, ys, 100, 5000)
    throughput = (xs.size + ys.size) / (time.perf_counter() - t0)

    ok = identical and flat
    report(8, "correlator exact and statistically flat", ok,
           f"bit-identical to O(n^2) reference: {identical}; "
           f"max |g2 - 1| = {np.max(np.abs(h.g2 - 1.0)):.3f} "
           f"(4 sigma = {4 * sigma:.3f}); throughput "
           f"{throughput / 1e6:.1f} M tags/s/core (soft target 10)")
    assert identical
    assert flat


def test_criterion_09_multiport_postselection():
    p3 = multiport_postselect_probability(3)
    p4 = multiport_postselect_probability(4)
    e3 = abs(p3 - 6 / 27)
    e4 = abs(p4 - math.factorial(4) / 4 ** 4)
    ok = e3 < 1e-9 and e4 < 1e-9
    report(9, "multiport one-photon-per-port probability n!/n^n", ok,
           f"n=3: {p3:.9f} (err {e3:.1e}); n=4: {p4:.9f} (err {e4:.1e})")
    assert e3 < 1e-9
    assert e4 < 1e-9


def test_criterion_10_power_calibration():
    power_pw = power_calibration(0.01, 67.2e-12, 329.14e12) * 1e12
    err = abs(power_pw - 32.46)
    ok = err < 0.01
    report(10, "excitation power at nbar = 0.01", ok,
           f"{power_pw:.3f} pW (expected 32.46 +/- 0.01)")
    assert err < 0.01
