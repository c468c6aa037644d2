"""Time-tag generation by exact sequential sampling of the bin chain.

The CW run is a Markov chain over time bins: the only quantum memory
between bins is the light stored in the two analyzer long arms (at most
one photon per arm injection at beta = 0), held as a pure conditional
state ("carry").  Each bin couples the carry and a fresh emission bin
through a fixed six-mode unitary, the emitter ancilla and the four
detector modes are measured, and the conditional state of the new
long-arm content becomes the next carry.  Measuring the ancilla per bin
is exact: it never interacts again, so any measurement basis reproduces
the traced dynamics.

The per-bin transition amplitudes are precomputed once per run from the
permanent oracle of the six-mode network (an independent route from the
Givens-decomposition evolution used by the analytics module).  The laser
phase theta_t enters only through the power m = photons + excited-flag
of the fresh bin, so the kernel combines precomputed phase-power blocks
with e^{i m theta_t} per bin.

Randomness is counter-based: every variate is a pure function of
(seed, stream id, counter), so streams are reproducible, splittable, and
independent of chunking or window bookkeeping.  Window size W therefore
does not affect output bytes; it is validated and recorded for
provenance only (windows overlap by the one-bin analyzer memory, which
the carry implements exactly).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np
from numba import njit
from scipy.special import ndtri

from .fock import amplitude_oracle, compose, direct_sum, ph, phase_delay, splitter
from .interferometer import DEFAULT_TAU, FransonConfig
from .source import SourceParams, background_alpha, bin_amplitudes

CHANNELS = ("A1", "A2", "B1", "B2")

# counter-based RNG stream ids
_STREAM_PHASE = 1
_STREAM_OUTCOME = 2
_STREAM_DETECTOR = 16  # + channel index * 4 + effect


@dataclass
class DetectorParams:
    efficiency: float = 1.0
    jitter: float = 0.0      # Gaussian sigma, seconds
    dark_rate: float = 0.0   # Hz
    dead_time: float = 0.0   # seconds

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must be in [0, 1]")
        for name in ("jitter", "dark_rate", "dead_time"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def ideal(self) -> bool:
        return (self.efficiency == 1.0 and self.jitter == 0.0
                and self.dark_rate == 0.0 and self.dead_time == 0.0)

    def to_json_dict(self) -> dict:
        return {"efficiency": self.efficiency,
                "jitter_ps": self.jitter * 1e12,
                "dark_hz": self.dark_rate,
                "dead_ps": self.dead_time * 1e12}

    @classmethod
    def from_json_dict(cls, d: dict) -> "DetectorParams":
        known = {"efficiency", "jitter_ps", "dark_hz", "dead_ps"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown detector keys: {sorted(unknown)}")
        return cls(efficiency=float(d.get("efficiency", 1.0)),
                   jitter=float(d.get("jitter_ps", 0.0)) * 1e-12,
                   dark_rate=float(d.get("dark_hz", 0.0)),
                   dead_time=float(d.get("dead_ps", 0.0)) * 1e-12)


def _ideal_detectors() -> dict:
    return {c: DetectorParams() for c in CHANNELS}


@dataclass
class RunConfig:
    duration: float = 1e-3            # seconds
    tau: float = DEFAULT_TAU
    source: SourceParams = field(default_factory=SourceParams)
    franson: FransonConfig = field(default_factory=FransonConfig)
    detectors: dict = field(default_factory=_ideal_detectors)
    seed: int = 0
    window_bins: int = 8

    def __post_init__(self):
        if self.duration <= 0 or self.tau <= 0:
            raise ValueError("duration and tau must be positive")
        if self.window_bins < 4:
            raise ValueError("window must cover at least 4 bins")
        if self.n_bins < self.window_bins:
            raise ValueError("run shorter than one window")
        if set(self.detectors) != set(CHANNELS):
            raise ValueError(f"detectors must cover exactly {CHANNELS}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        tau_ps = self.tau * 1e12
        if abs(tau_ps - round(tau_ps)) > 1e-6:
            raise ValueError("tau must sit on the 1 ps tag grid")
        self.source.validate_timescales(self.tau)

    @property
    def n_bins(self) -> int:
        return int(round(self.duration / self.tau))

    @property
    def tau_ps(self) -> int:
        return int(round(self.tau * 1e12))

    def to_json_dict(self) -> dict:
        return {
            "duration_s": self.duration,
            "tau_ps": self.tau * 1e12,
            "seed": int(self.seed),
            "window_bins": self.window_bins,
            "source": self.source.to_json_dict(),
            "network": self.franson.to_json_dict(),
            "detectors": {c: d.to_json_dict() for c, d in self.detectors.items()},
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "RunConfig":
        known = {"duration_s", "tau_ps", "seed", "window_bins",
                 "source", "network", "detectors"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown run keys: {sorted(unknown)}")
        kw = {}
        if "duration_s" in d:
            kw["duration"] = float(d["duration_s"])
        if "tau_ps" in d:
            kw["tau"] = float(d["tau_ps"]) * 1e-12
        if "seed" in d:
            kw["seed"] = int(d["seed"])
        if "window_bins" in d:
            kw["window_bins"] = int(d["window_bins"])
        if "source" in d:
            kw["source"] = SourceParams.from_json_dict(d["source"])
        if "network" in d:
            kw["franson"] = FransonConfig.from_json_dict(d["network"])
        if "detectors" in d:
            det = _ideal_detectors()
            for c, dd in d["detectors"].items():
                if c not in CHANNELS:
                    raise ValueError(f"unknown detector channel {c!r}")
                det[c] = DetectorParams.from_json_dict(dd)
            kw["detectors"] = det
        return cls(**kw)


@dataclass
class TimeTagStream:
    channel: str
    timestamps: np.ndarray  # uint64 picoseconds, strictly increasing

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValueError(f"unknown channel {self.channel!r}")
        ts = np.asarray(self.timestamps, dtype=np.uint64)
        if ts.ndim != 1:
            raise ValueError("timestamps must be one-dimensional")
        if ts.size > 1 and not np.all(ts[1:] > ts[:-1]):
            raise ValueError("timestamps must be strictly increasing")
        self.timestamps = ts

    def __len__(self):
        return int(self.timestamps.size)


# ---------------------------------------------------------------------------
# counter-based randomness (splitmix64-style avalanche of (seed, stream, ctr))

_C1 = np.uint64(0x9E3779B97F4A7C15)
_C2 = np.uint64(0xBF58476D1CE4E5B9)
_C3 = np.uint64(0x94D049BB133111EB)


def _mix_array(seed: int, stream: int, counters: np.ndarray) -> np.ndarray:
    """Vectorized counter hash -> uint64 (numpy route)."""
    with np.errstate(over="ignore"):
        z = (np.uint64(seed) * _C3 + np.uint64(stream) * _C1
             + counters.astype(np.uint64) * _C2)
        z ^= z >> np.uint64(30)
        z *= _C2
        z ^= z >> np.uint64(27)
        z *= _C3
        z ^= z >> np.uint64(31)
    return z


def _uniforms(seed: int, stream: int, counters: np.ndarray) -> np.ndarray:
    """Open-interval (0, 1) doubles, one per counter."""
    z = _mix_array(seed, stream, counters)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


@njit(cache=True, inline="always")
def _mix_scalar(seed, stream, counter):
    z = (np.uint64(seed) * np.uint64(0x94D049BB133111EB)
         + np.uint64(stream) * np.uint64(0x9E3779B97F4A7C15)
         + np.uint64(counter) * np.uint64(0xBF58476D1CE4E5B9))
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


@njit(cache=True, inline="always")
def _uniform_scalar(seed, stream, counter):
    z = _mix_scalar(seed, stream, counter)
    return (np.float64(z >> np.uint64(11)) + 0.5) * 2.0 ** -53


def phase_walk(tl: float, tau: float, n_bins: int, seed: int) -> np.ndarray:
    """Laser phase random walk, one phase per bin (radians).

    Gaussian increments of variance 2 tau / TL (Lorentzian-linewidth
    diffusion), so adjacent bins correlate as <e^{i(d theta)}> =
    e^{-tau/TL}.  Deterministic in (seed, bin index).
    """
    if tl <= tau:
        raise ValueError("laser coherence time must exceed the bin length")
    if n_bins < 1:
        raise ValueError("need at least one bin")
    u = _uniforms(seed, _STREAM_PHASE, np.arange(n_bins, dtype=np.uint64))
    steps = math.sqrt(2.0 * tau / tl) * ndtri(u)
    steps[0] = 0.0
    return np.cumsum(steps)


# ---------------------------------------------------------------------------
# per-bin transition tensors


def _step_network(phi_a: float, phi_b: float, transmission: float = 0.5):
    """Six-mode unitary for one bin: fresh source bin + two long-arm
    carries in, four detector ports + two new carries out.  Built from
    the same splitter/phase primitives as the full network so the port
    conventions cannot drift apart."""
    net = splitter(ph("S"), ph("Svac"), ph("A:in"), ph("B:in"), transmission)
    sides = []
    for side, phi in (("A", phi_a), ("B", phi_b)):
        first = splitter(ph(f"{side}:in"), ph(f"{side}:vac"),
                         ph(f"{side}:short"), ph(f"{side}:Lnew"), transmission)
        delay = phase_delay(ph(f"{side}:Lold"), ph(f"{side}:long+"), phi)
        second = splitter(ph(f"{side}:short"), ph(f"{side}:long+"),
                          ph(f"{side}2"), ph(f"{side}1"), transmission)
        sides.append(compose(compose(first, delay), second))
    return compose(net, direct_sum(*sides))


def _enumerate_tuples(n_slots: int, total_max: int):
    """All occupation tuples of length n_slots with sum <= total_max."""
    out = []

    def rec(prefix, remaining):
        if len(prefix) == n_slots:
            out.append(tuple(prefix))
            return
        for n in range(remaining + 1):
            rec(prefix + [n], remaining - n)

    rec([], total_max)
    return out


class _StepTensors:
    """Precomputed per-bin transition amplitudes, grouped by carry state
    and laser-phase power, flattened for the kernel."""

    def __init__(self, cfg: RunConfig):
        q, beta = cfg.source.q, cfg.source.beta
        nb_cap = 1 if beta == 0.0 else 2
        alpha = background_alpha(q, beta) if beta else 0j
        sectors = bin_amplitudes(q, 0.0, alpha, n_max=nb_cap)

        self.carries = [(a, b) for a, b in _enumerate_tuples(2, nb_cap)]
        carry_index = {c: i for i, c in enumerate(self.carries)}
        self.n_carry = len(self.carries)
        max_tot = 2 * nb_cap
        patterns = _enumerate_tuples(4, max_tot)
        outcomes = [(e, p) for e in (0, 1) for p in patterns]
        outcome_index = {o: i for i, o in enumerate(outcomes)}
        self.n_outcomes = len(outcomes)
        self.pattern_table = np.array([p for _, p in outcomes], dtype=np.int8)
        self.n_phase_powers = 2 * nb_cap  # m = photons + excited flag

        net = _step_network(cfg.franson.phi_a, cfg.franson.phi_b,
                            cfg.franson.splitter_transmission)
        pos_in = {lab: i for i, lab in enumerate(net.in_labels)}
        pos_out = {lab: i for i, lab in enumerate(net.out_labels)}
        i_s = pos_in[ph("S")]
        i_ca, i_cb = pos_in[ph("A:Lold")], pos_in[ph("B:Lold")]
        o_det = [pos_out[ph(c)] for c in CHANNELS]
        o_ca, o_cb = pos_out[ph("A:Lnew")], pos_out[ph("B:Lnew")]

        entries: dict[tuple[int, int], dict[int, complex]] = {}
        for c_idx, (ca, cb) in enumerate(self.carries):
            for (n_s, exc), base in sectors.items():
                m = n_s + exc
                total = ca + cb + n_s
                in_occ = [0] * 6
                in_occ[i_s], in_occ[i_ca], in_occ[i_cb] = n_s, ca, cb
                for out in _enumerate_tuples(6, total):
                    if sum(out) != total:
                        continue
                    cpa, cpb = out[o_ca], out[o_cb]
                    if cpa + cpb > nb_cap:
                        continue
                    amp = amplitude_oracle(net, in_occ, out)
                    if abs(amp) < 1e-15:
                        continue
                    pat = tuple(out[i] for i in o_det)
                    o_idx = outcome_index[(exc, pat)]
                    cp_idx = carry_index[(cpa, cpb)]
                    row = o_idx * self.n_carry + cp_idx
                    bucket = entries.setdefault((c_idx, m), {})
                    bucket[row] = bucket.get(row, 0j) + base * amp

        n_keys = self.n_carry * self.n_phase_powers
        starts = np.zeros(n_keys + 1, dtype=np.int64)
        rows_list, vals_list = [], []
        for c_idx in range(self.n_carry):
            for m in range(self.n_phase_powers):
                bucket = entries.get((c_idx, m), {})
                for row in sorted(bucket):
                    rows_list.append(row)
                    vals_list.append(bucket[row])
                starts[c_idx * self.n_phase_powers + m + 1] = len(rows_list)
        self.starts = starts
        self.rows = np.array(rows_list, dtype=np.int64)
        self.vals = np.array(vals_list, dtype=np.complex128)


@njit(cache=True)
def _chain_kernel(n_bins, tau_ps, seed, phases, starts, rows, vals,
                  pattern_table, n_carry, n_powers, n_outcomes,
                  tags, tag_counts, cap):
    n_rows_total = n_outcomes * n_carry
    amp = np.zeros(n_rows_total, dtype=np.complex128)
    touched = np.zeros(n_rows_total, dtype=np.uint8)
    touched_rows = np.empty(n_rows_total, dtype=np.int64)
    prob = np.zeros(n_outcomes, dtype=np.float64)
    o_touched = np.empty(n_outcomes, dtype=np.int64)
    o_flag = np.zeros(n_outcomes, dtype=np.uint8)
    gamma = np.zeros(n_carry, dtype=np.complex128)
    gamma[0] = 1.0 + 0j

    for t in range(n_bins):
        theta = phases[t]
        # accumulate output amplitudes over carry components and powers
        n_touched = 0
        for c in range(n_carry):
            g = gamma[c]
            if g.real * g.real + g.imag * g.imag < 1e-28:
                continue
            for m in range(n_powers):
                w = g * complex(math.cos(m * theta), math.sin(m * theta))
                k0 = starts[c * n_powers + m]
                k1 = starts[c * n_powers + m + 1]
                for k in range(k0, k1):
                    r = rows[k]
                    if touched[r] == 0:
                        touched[r] = 1
                        touched_rows[n_touched] = r
                        n_touched += 1
                        amp[r] = w * vals[k]
                    else:
                        amp[r] += w * vals[k]
        # outcome probabilities
        n_o = 0
        p_tot = 0.0
        for i in range(n_touched):
            r = touched_rows[i]
            a = amp[r]
            p = a.real * a.real + a.imag * a.imag
            o = r // n_carry
            if o_flag[o] == 0:
                o_flag[o] = 1
                o_touched[n_o] = o
                n_o += 1
                prob[o] = p
            else:
                prob[o] += p
            p_tot += p
        # sample an outcome
        u = _uniform_scalar(seed, _STREAM_OUTCOME, t) * p_tot
        o_sel = o_touched[n_o - 1]
        acc = 0.0
        for i in range(n_o):
            acc += prob[o_touched[i]]
            if u < acc:
                o_sel = o_touched[i]
                break
        # collapse the carry
        norm = math.sqrt(prob[o_sel])
        base = o_sel * n_carry
        for c in range(n_carry):
            r = base + c
            gamma[c] = amp[r] / norm if touched[r] == 1 else 0.0 + 0j
        # emit tags (threshold detectors: one tag per clicked channel)
        stamp = np.uint64(t) * np.uint64(tau_ps)
        for d in range(4):
            if pattern_table[o_sel, d] >= 1 and tag_counts[d] < cap:
                tags[d, tag_counts[d]] = stamp
                tag_counts[d] += 1
        # reset scratch
        for i in range(n_touched):
            r = touched_rows[i]
            amp[r] = 0.0 + 0j
            touched[r] = 0
        for i in range(n_o):
            o_flag[o_touched[i]] = 0


@njit(cache=True)
def _dead_time_prune(ts, dead_ps):
    out = np.empty(ts.size, dtype=np.uint64)
    n = 0
    last = np.uint64(0)
    have_last = False
    for i in range(ts.size):
        t = ts[i]
        if have_last and np.int64(t - last) <= np.int64(dead_ps) and t >= last:
            continue
        out[n] = t
        n += 1
        last = t
        have_last = True
    return out[:n]


def apply_detector_model(timestamps: np.ndarray, det: DetectorParams,
                         seed: int, channel: str,
                         duration_ps: int) -> np.ndarray:
    """Detector imperfections on a sorted picosecond tag array:
    efficiency thinning, Gaussian jitter (then re-sort), Poisson dark
    counts, dead-time pruning (keep-first).  Ideal parameters return the
    input unchanged."""
    ts = np.asarray(timestamps, dtype=np.uint64)
    if ts.size > 1 and not np.all(ts[1:] >= ts[:-1]):
        raise ValueError("timestamps must be sorted")
    if det.ideal:
        return ts
    ch = CHANNELS.index(channel)
    stream = _STREAM_DETECTOR + 4 * ch

    if det.efficiency < 1.0 and ts.size:
        u = _uniforms(seed, stream, ts)  # keyed by timestamp: order-free
        ts = ts[u < det.efficiency]
    if det.jitter > 0.0 and ts.size:
        u = _uniforms(seed, stream + 1, ts)
        shift = ndtri(u) * det.jitter * 1e12
        shifted = ts.astype(np.float64) + shift
        shifted = np.clip(np.rint(shifted), 0, None)
        ts = np.sort(shifted.astype(np.uint64))
    if det.dark_rate > 0.0:
        mean = det.dark_rate * duration_ps * 1e-12
        rng = np.random.Generator(np.random.Philox(
            key=[np.uint64(seed), np.uint64(stream + 2)]))
        n_dark = rng.poisson(mean)
        dark = rng.integers(0, duration_ps, size=n_dark, dtype=np.uint64)
        ts = np.sort(np.concatenate([ts, np.sort(dark)]), kind="stable")
    ts = np.unique(ts)  # merged coincident tags are indistinguishable
    if det.dead_time > 0.0 and ts.size:
        ts = _dead_time_prune(ts, int(round(det.dead_time * 1e12)))
    return ts


def generate(cfg: RunConfig) -> tuple[dict, dict]:
    """Run the chain sampler; returns ({channel: TimeTagStream}, stats).

    Stats carry the ground truth used by convergence tests: bin count,
    per-channel physical counts before and after the detector model, and
    the config echo.
    """
    n_bins = cfg.n_bins
    tensors = _StepTensors(cfg)
    phases = phase_walk(cfg.source.tl, cfg.tau, n_bins, cfg.seed)

    mean_flux = 0.5 * cfg.source.q / (1.0 - cfg.source.beta)
    cap = max(4096, int(n_bins * min(1.0, 2.0 * mean_flux)) + 4096)
    tags = np.zeros((4, cap), dtype=np.uint64)
    counts = np.zeros(4, dtype=np.int64)
    _chain_kernel(n_bins, cfg.tau_ps, np.uint64(cfg.seed), phases,
                  tensors.starts, tensors.rows, tensors.vals,
                  tensors.pattern_table, tensors.n_carry,
                  tensors.n_phase_powers, tensors.n_outcomes,
                  tags, counts, cap)

    duration_ps = n_bins * cfg.tau_ps
    streams = {}
    stats = {"n_bins": n_bins, "tau_ps": cfg.tau_ps,
             "config": cfg.to_json_dict(),
             "physical_counts": {}, "detected_counts": {}}
    for d, channel in enumerate(CHANNELS):
        raw = tags[d, : counts[d]].copy()
        stats["physical_counts"][channel] = int(raw.size)
        final = apply_detector_model(raw, cfg.detectors[channel],
                                     cfg.seed, channel, duration_ps)
        stats["detected_counts"][channel] = int(final.size)
        streams[channel] = TimeTagStream(channel, final)
    return streams, stats
