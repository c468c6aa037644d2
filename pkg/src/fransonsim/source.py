"""Per-time-bin emission states for a CW-driven two-level emitter.

Each bin emits a vacuum--one-photon superposition.  The emitter is kept as
a two-level ancilla per bin (purification), so the per-bin state is

    sqrt(1 - q) |0, g>  +  sqrt(q) e^{i theta} (|0, e> + |1, g>) / sqrt(2)

with q the emitted-branch weight and theta the laser phase of the bin.
The one-photon probability after tracing the ancilla is q/2 and the
photonic coherence <1|rho|0> has magnitude sqrt(q (1 - q) / 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .fock import FockBasis, FockState, ModeLabel, TruncationOverflow

PLANCK = 6.62607015e-34  # J s, exact


@dataclass
class SourceParams:
    """Source calibration and noise parameters.

    ``q`` is the per-bin emitted-branch weight; ``nbar`` is used only for
    power calibration and labeling (the map nbar -> q is a lab calibration
    we do not model).  ``beta`` is the laser-background fraction of the
    total mean photon number.
    """

    q: float = 0.02
    nbar: float = 0.01
    t1: float = 67.2e-12
    nu: float = 329.14e12
    tl: float = 10e-6
    beta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q must be in [0, 1]")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must be in [0, 1)")
        for name in ("t1", "nu", "tl"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def validate_timescales(self, tau: float):
        """The bin-mode picture needs T1 << tau << TL."""
        if not (self.t1 < tau < self.tl):
            raise ValueError(
                f"timescale ordering violated: T1={self.t1} tau={tau} TL={self.tl}"
            )

    def to_json_dict(self) -> dict:
        return {
            "q": self.q,
            "nbar": self.nbar,
            "t1_ps": self.t1 * 1e12,
            "nu_thz": self.nu * 1e-12,
            "tl_us": self.tl * 1e6,
            "beta": self.beta,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SourceParams":
        known = {"q", "nbar", "t1_ps", "nu_thz", "tl_us", "beta"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown source keys: {sorted(unknown)}")
        kw = {}
        if "q" in d:
            kw["q"] = float(d["q"])
        if "nbar" in d:
            kw["nbar"] = float(d["nbar"])
        if "t1_ps" in d:
            kw["t1"] = float(d["t1_ps"]) * 1e-12
        if "nu_thz" in d:
            kw["nu"] = float(d["nu_thz"]) * 1e12
        if "tl_us" in d:
            kw["tl"] = float(d["tl_us"]) * 1e-6
        if "beta" in d:
            kw["beta"] = float(d["beta"])
        return cls(**kw)


def mean_rf_photon_number(q: float) -> float:
    """Traced mean photon number per bin of the bare emission state."""
    return q / 2.0


def displacement_matrix(alpha: complex, n_max: int) -> np.ndarray:
    """Number-basis displacement operator truncated to n_max photons.

    Computed on an enlarged space and sliced, so entries within the kept
    block are accurate; the resulting state must be renormalized
    explicitly by the caller.
    """
    dim = n_max + 1 + 24
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    d = expm(alpha * a.conj().T - np.conj(alpha) * a)
    return d[: n_max + 1, : n_max + 1]


def bin_amplitudes(q: float, theta: float = 0.0, alpha: complex = 0j,
                   n_max: int = 3) -> dict[tuple[int, int], complex]:
    """Amplitudes {(photon_n, ancilla_e): amp} for one emission bin.

    ``alpha`` is an optional coherent background displacement; its phase
    is multiplied by e^{i theta} along with the emitted branch (the
    leaked laser is phase-locked to the drive).  Truncation beyond
    ``n_max`` is renormalized away explicitly.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must be in [0, 1]")
    g_vec = np.zeros(n_max + 1, dtype=complex)
    e_vec = np.zeros(n_max + 1, dtype=complex)
    g_vec[0] = math.sqrt(1.0 - q)
    if n_max >= 1:
        g_vec[1] = math.sqrt(q / 2.0) * np.exp(1j * theta)
    e_vec[0] = math.sqrt(q / 2.0) * np.exp(1j * theta)
    if alpha != 0:
        d = displacement_matrix(alpha * np.exp(1j * theta), n_max)
        g_vec = d @ g_vec
        e_vec = d @ e_vec
        norm = math.sqrt(float(np.sum(np.abs(g_vec) ** 2 + np.abs(e_vec) ** 2)))
        g_vec /= norm
        e_vec /= norm
    out: dict[tuple[int, int], complex] = {}
    for n in range(n_max + 1):
        if abs(g_vec[n]) > 0:
            out[(n, 0)] = complex(g_vec[n])
        if abs(e_vec[n]) > 0:
            out[(n, 1)] = complex(e_vec[n])
    return out


def bin_state(params: SourceParams, basis: FockBasis, photon_mode: ModeLabel,
              ancilla_mode: ModeLabel, theta: float = 0.0) -> FockState:
    """Pure-state emission for one bin embedded in ``basis`` (vacuum
    elsewhere); background is *not* applied here, see
    :func:`add_laser_background`."""
    i_ph = basis.index[photon_mode]
    i_an = basis.index[ancilla_mode]
    amps = bin_amplitudes(params.q, theta, 0j, n_max=min(1, basis.n_max))
    zero = [0] * len(basis.modes)
    terms = {}
    for (n, e), a in amps.items():
        occ = list(zero)
        occ[i_ph] = n
        occ[i_an] = e
        terms[tuple(occ)] = a
    return FockState(basis, terms)


def background_alpha(q: float, beta: float) -> complex:
    """Coherent background amplitude: |alpha|^2 = beta/(1-beta) * <n>_RF."""
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must be in [0, 1)")
    return complex(math.sqrt(beta / (1.0 - beta) * mean_rf_photon_number(q)))


def add_laser_background(state: FockState, beta: float, theta: float,
                         photon_mode: ModeLabel, q: float) -> FockState:
    """Coherently displace one bin's photonic mode by the phase-locked
    laser leakage; beta = 0 returns the state unchanged (same term set)."""
    if beta == 0.0:
        return state
    n_max = state.basis.n_max
    if n_max < 2:
        raise TruncationOverflow("background needs a basis admitting n = 2")
    alpha = background_alpha(q, beta) * np.exp(1j * theta)
    d = displacement_matrix(alpha, n_max)
    i_ph = state.basis.index[photon_mode]
    terms: dict[tuple[int, ...], complex] = {}
    for occ, amp in state.terms.items():
        n_in = occ[i_ph]
        head = sum(occ[j] for j in state.basis.photonic if j != i_ph)
        for n_out in range(n_max + 1 - head):
            c = d[n_out, n_in]
            if abs(c) < 1e-18:
                continue
            new = list(occ)
            new[i_ph] = n_out
            key = tuple(new)
            terms[key] = terms.get(key, 0j) + amp * c
    out = FockState(state.basis, terms)
    return out.normalized()


def power_calibration(nbar: float, t1: float, nu: float) -> float:
    """Incident power from the excitation flux: P = nbar h nu / T1."""
    if nbar <= 0 or t1 <= 0 or nu <= 0:
        raise ValueError("calibration inputs must be positive")
    return nbar * PLANCK * nu / t1


def g2_source(params: SourceParams, t: float) -> float:
    """Model HBT autocorrelation of the source including background.

    Ideal weak-drive two-level emission gives
    g2_s(t) = (1 - e^{-t/(2 T1)})^2; the laser background of fractional
    intensity beta is folded in at the second-moment level:
    g2 = (1 - beta)^2 g2_s + beta (2 - beta).
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    g2_ideal = (1.0 - math.exp(-t / (2.0 * params.t1))) ** 2
    b = params.beta
    return (1.0 - b) ** 2 * g2_ideal + b * (2.0 - b)


def beta_for_g2(target_g2_0: float) -> float:
    """Background fraction whose model g2(0) equals the target."""
    if not 0.0 <= target_g2_0 < 1.0:
        raise ValueError("target g2(0) must be in [0, 1)")
    return 1.0 - math.sqrt(1.0 - target_g2_0)
