"""Builders for the Franson optical network over time-binned modes.

Layout: a fiber beamsplitter (FBS) splits the source stream toward two
asymmetric Mach-Zehnder analyzers (sides "A" and "B").  Each analyzer is
two 50/50 splitters with a one-bin delay and a phase on the long arm.

Port convention (documented once, here): every splitter is symmetric with
``i`` on reflection, see :func:`fransonsim.fock.splitter`.  Detector port 1
of each analyzer is the output whose singles fringe is ``1 + V cos(phi)``
(constructive at phi = 0); port 2 is shifted by pi.  That pi shift between
the detector pairs is a consequence of the splitter convention and is
asserted by tests, not assumed.

Time bins are discrete modes (T1 << tau), so an analyzer maps input bin t
to output bins t and t+1 with no partial overlap.  A finite bin chain
needs two boundary vacuum inputs per analyzer: the long-arm content
entering the first output bin and the short-arm content of the last one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fock import (FockState, ModeLabel, ModeNetwork, PostselectionError,
                   apply_network, compose, dft_network, direct_sum,
                   make_basis, ph, phase_delay, postselect, splitter)

DEFAULT_TAU = 1.07e-9  # analyzer delay, seconds


@dataclass
class FransonConfig:
    phi_a: float = 0.0
    phi_b: float = 0.0
    n_bins: int = 2
    splitter_transmission: float = 0.5
    convention: str = "i-on-reflection"

    def __post_init__(self):
        if self.n_bins < 2:
            raise ValueError("need at least early and late bins")
        if not 0.0 < self.splitter_transmission < 1.0:
            raise ValueError("splitter transmission must be in (0, 1)")

    def to_json_dict(self) -> dict:
        return {"phi_a": self.phi_a, "phi_b": self.phi_b, "n_bins": self.n_bins}

    @classmethod
    def from_json_dict(cls, d: dict) -> "FransonConfig":
        known = {"phi_a", "phi_b", "n_bins", "multiport_n"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown network keys: {sorted(unknown)}")
        kw = {k: d[k] for k in ("phi_a", "phi_b") if k in d}
        if "n_bins" in d:
            kw["n_bins"] = int(d["n_bins"])
        return cls(**kw)


@dataclass
class MultiportConfig:
    n: int = 3
    n_bins: int = 3
    kind: str = "discrete-fourier"
    with_analyzers: bool = False
    phases: Sequence[float] = ()

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("multiport needs n >= 2")
        if self.kind != "discrete-fourier":
            raise ValueError(f"unknown multiport kind {self.kind!r}")


def source_mode(t: int) -> ModeLabel:
    return ph("S", t)


def detector_mode(name: str, t: int) -> ModeLabel:
    """Detector port mode, name in {A1, A2, B1, B2}."""
    return ph(name, t)


def build_amzi(phi: float, side: str, n_bins: int,
               input_labels: Sequence[ModeLabel] | None = None,
               transmission: float = 0.5) -> ModeNetwork:
    """One asymmetric Mach-Zehnder analyzer over ``n_bins`` input bins.

    Output ports ``{side}1`` / ``{side}2`` span bins 0..n_bins (the long
    arm shifts by one).  Extra vacuum inputs: ``{side}:vac`` per bin (the
    unused first-splitter port) and the two bin-chain boundaries.
    """
    if input_labels is None:
        input_labels = [ph(f"{side}:in", t) for t in range(n_bins)]
    input_labels = list(input_labels)
    if len(input_labels) != n_bins:
        raise ValueError("one input label per bin required")

    first = direct_sum(*[
        splitter(input_labels[t], ph(f"{side}:vac", t),
                 ph(f"{side}:short", t), ph(f"{side}:long", t),
                 transmission=transmission)
        for t in range(n_bins)
    ])
    delay = direct_sum(*[
        phase_delay(ph(f"{side}:long", t), ph(f"{side}:long+", t + 1), phi)
        for t in range(n_bins)
    ])
    # Port 1 carries short + e^{i phi} long (constructive singles at 0),
    # port 2 the i-shifted combination; see module docstring.
    second = direct_sum(*[
        splitter(ph(f"{side}:short", t), ph(f"{side}:long+", t),
                 ph(f"{side}2", t), ph(f"{side}1", t),
                 transmission=transmission)
        for t in range(n_bins + 1)
    ])
    return compose(compose(first, delay), second)


def fbs(n_bins: int, transmission: float = 0.5) -> ModeNetwork:
    """The fiber beamsplitter layer: source bin t -> A-side and B-side."""
    return direct_sum(*[
        splitter(source_mode(t), ph("S:vac", t),
                 ph("A:in", t), ph("B:in", t), transmission=transmission)
        for t in range(n_bins)
    ])


def build_franson(cfg: FransonConfig) -> ModeNetwork:
    """Full Fig-1-style network: FBS feeding two analyzers."""
    split = fbs(cfg.n_bins, cfg.splitter_transmission)
    amzi_a = build_amzi(cfg.phi_a, "A", cfg.n_bins,
                        input_labels=[ph("A:in", t) for t in range(cfg.n_bins)],
                        transmission=cfg.splitter_transmission)
    amzi_b = build_amzi(cfg.phi_b, "B", cfg.n_bins,
                        input_labels=[ph("B:in", t) for t in range(cfg.n_bins)],
                        transmission=cfg.splitter_transmission)
    return compose(split, direct_sum(amzi_a, amzi_b))


def build_multiport(cfg: MultiportConfig) -> ModeNetwork:
    """Discrete-Fourier splitter over n spatial ports, applied per bin.

    With ``with_analyzers`` each output port feeds its own analyzer
    (phases from ``cfg.phases``); otherwise ports go straight to
    detectors ``P0..P{n-1}`` (the post-selection-probability experiment).
    """
    n = cfg.n
    layers = []
    for t in range(cfg.n_bins):
        ins = [ph(f"P{p}:in", t) for p in range(n)]
        outs = [ph(f"P{p}", t) for p in range(n)]
        layers.append(dft_network(ins, outs))
    net = direct_sum(*layers)
    if not cfg.with_analyzers:
        return net
    phases = list(cfg.phases) or [0.0] * n
    if len(phases) != n:
        raise ValueError("need one analyzer phase per port")
    analyzers = [
        build_amzi(phases[p], f"P{p}", cfg.n_bins,
                   input_labels=[ph(f"P{p}", t) for t in range(cfg.n_bins)])
        for p in range(n)
    ]
    return compose(net, direct_sum(*analyzers))


def multiport_postselect_probability(n: int) -> float:
    """One ideal photon per time bin into port 0 of an n-port DFT;
    probability of finding exactly one photon in every output port."""
    cfg = MultiportConfig(n=n, n_bins=n)
    net = build_multiport(cfg)
    basis = make_basis(list(net.in_labels), n)
    occ = [0] * len(net.in_labels)
    pos = {lab: i for i, lab in enumerate(net.in_labels)}
    for t in range(n):
        occ[pos[ph("P0:in", t)]] = 1
    state = FockState(basis, {tuple(occ): 1.0})
    out_state = apply_network(state, net)

    def one_per_port(view):
        per_port = {}
        for lab, cnt in view.items():
            per_port[lab.spatial] = per_port.get(lab.spatial, 0) + cnt
        return all(per_port.get(f"P{p}", 0) == 1 for p in range(n))

    _, prob = postselect(out_state, one_per_port)
    return prob


def postselect_bell_pair(state: FockState, early: int = 0, late: int = 1
                         ) -> tuple[FockState, float]:
    """Condition an FBS output (before the analyzers) on one photon per
    side in opposite bins.

    Returns the conditional state and the selection probability.  For
    identical laser phase in the two bins the conditional state is the
    symmetric time-bin Bell pair.
    """
    a_e, a_l = ph("A:in", early), ph("A:in", late)
    b_e, b_l = ph("B:in", early), ph("B:in", late)
    basis = state.basis
    for lab in (a_e, a_l, b_e, b_l):
        if lab not in basis.index:
            raise PostselectionError(f"state lacks FBS output mode {lab}")

    def opposite_bins(view):
        n_ph = sum(c for lab, c in view.items() if lab.kind == "photonic")
        ok1 = view[a_e] == 1 and view[b_l] == 1
        ok2 = view[a_l] == 1 and view[b_e] == 1
        return n_ph == 2 and (ok1 or ok2) and not (ok1 and ok2)

    return postselect(state, opposite_bins)


def bell_state_fidelity(state: FockState, early: int = 0, late: int = 1,
                        relative_phase: float = 0.0) -> float:
    """Overlap-squared with 1/sqrt(2)(|1e_A 1l_B> + e^{i phase}|1l_A 1e_B>),
    tracing nothing (ancillas must be summed coherently per branch)."""
    basis = state.basis
    idx = {lab: basis.index[lab] for lab in
           (ph("A:in", early), ph("A:in", late),
            ph("B:in", early), ph("B:in", late))}
    amp = 0j
    for occ, a in state.terms.items():
        n_ph = sum(occ[i] for i in basis.photonic)
        if n_ph != 2:
            continue
        if occ[idx[ph("A:in", early)]] == 1 and occ[idx[ph("B:in", late)]] == 1:
            amp += a / math.sqrt(2.0)
        elif occ[idx[ph("A:in", late)]] == 1 and occ[idx[ph("B:in", early)]] == 1:
            amp += a * np.exp(-1j * relative_phase) / math.sqrt(2.0)
    return abs(amp) ** 2
