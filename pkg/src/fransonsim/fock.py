"""Sparse truncated Fock-space engine for linear-optical mode networks.

States are sparse superpositions over occupation vectors of labeled modes.
Two independent evolution paths are provided:

* :func:`apply_network` decomposes a mode unitary into two-mode Givens
  rotations plus single-mode phases and applies them sequentially in the
  occupation basis.
* :func:`amplitude_oracle` evaluates single transition amplitudes through a
  Ryser permanent of the row/column-repeated submatrix.

The two paths share no code beyond the matrix itself and are cross-checked
in the test suite.

Conventions
-----------
A network matrix ``U`` maps input amplitudes to output amplitudes by
columns: a single photon in input mode ``j`` evolves to
``sum_i U[i, j] |1_i>``.  Beamsplitters are symmetric: transmission is real,
reflection carries a factor ``i``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

PRUNE_THRESHOLD = 1e-15
UNITARITY_TOL = 1e-12

PHOTONIC = "photonic"
ANCILLA = "ancilla"


class FockError(ValueError):
    """Base class for Fock-engine failures."""


class TruncationOverflow(FockError):
    """A term would exceed the basis truncation; never dropped silently."""


class PostselectionError(FockError):
    """Conditioning on an outcome of zero probability."""


@dataclass(frozen=True, order=True)
class ModeLabel:
    """A (kind, spatial port, time bin) mode identifier.

    ``timebin`` is counted in units of the analyzer delay tau.
    """

    kind: str
    spatial: str
    timebin: int

    def __post_init__(self):
        if self.kind not in (PHOTONIC, ANCILLA):
            raise ValueError(f"unknown mode kind {self.kind!r}")

    def __repr__(self):
        tag = "ph" if self.kind == PHOTONIC else "anc"
        return f"{tag}({self.spatial!r},{self.timebin})"


def ph(spatial: str, timebin: int = 0) -> ModeLabel:
    return ModeLabel(PHOTONIC, spatial, timebin)


def anc(spatial: str, timebin: int = 0) -> ModeLabel:
    return ModeLabel(ANCILLA, spatial, timebin)


class FockBasis:
    """Ordered mode list plus a photonic-total truncation.

    The truncation ``n_max`` bounds the total photon number summed over
    photonic modes; emitter ancillas are two-level (0 or 1 excitation) and
    do not count toward the photonic total.  Basis enumeration is
    lexicographic over (mode order, occupation) so outputs are byte-stable.
    """

    def __init__(self, modes: Sequence[ModeLabel], n_max: int):
        modes = tuple(modes)
        if not modes:
            raise ValueError("empty mode list")
        if len(set(modes)) != len(modes):
            raise FockError("duplicate mode labels")
        if n_max < 1:
            raise ValueError("n_max must be >= 1")
        self.modes = modes
        self.n_max = int(n_max)
        self.index = {m: i for i, m in enumerate(modes)}
        self.photonic = tuple(i for i, m in enumerate(modes) if m.kind == PHOTONIC)
        self.ancilla = tuple(i for i, m in enumerate(modes) if m.kind == ANCILLA)

    def cap(self, i: int) -> int:
        return self.n_max if self.modes[i].kind == PHOTONIC else 1

    def states(self) -> Iterable[tuple[int, ...]]:
        """All occupation vectors with photonic total <= n_max, in order."""
        caps = [self.cap(i) for i in range(len(self.modes))]
        photonic = [m.kind == PHOTONIC for m in self.modes]
        occ = [0] * len(self.modes)

        def rec(i: int, used: int):
            if i == len(occ):
                yield tuple(occ)
                return
            top = caps[i]
            if photonic[i]:
                top = min(top, self.n_max - used)
            for n in range(top + 1):
                occ[i] = n
                yield from rec(i + 1, used + (n if photonic[i] else 0))
            occ[i] = 0

        yield from rec(0, 0)

    @property
    def size(self) -> int:
        return sum(1 for _ in self.states())

    def check_occupation(self, occ: tuple[int, ...]):
        if len(occ) != len(self.modes):
            raise FockError("occupation length does not match basis")
        total = 0
        for i, n in enumerate(occ):
            if n < 0:
                raise FockError("negative occupation")
            if self.modes[i].kind == ANCILLA:
                if n > 1:
                    raise FockError("ancilla occupation must be 0 or 1")
            else:
                total += n
        if total > self.n_max:
            raise TruncationOverflow(
                f"photonic total {total} exceeds truncation {self.n_max}"
            )

    def __eq__(self, other):
        return (
            isinstance(other, FockBasis)
            and self.modes == other.modes
            and self.n_max == other.n_max
        )

    def __hash__(self):
        return hash((self.modes, self.n_max))


def make_basis(modes: Sequence[ModeLabel], n_max: int) -> FockBasis:
    """Construct a basis; errors on duplicate labels or n_max < 1."""
    return FockBasis(modes, n_max)


class FockState:
    """Sparse superposition: occupation vector -> complex amplitude.

    Immutable by convention; operations return new states.
    """

    __slots__ = ("basis", "terms")

    def __init__(self, basis: FockBasis, terms: Mapping[tuple[int, ...], complex],
                 check: bool = True):
        self.basis = basis
        self.terms = dict(terms)
        if check:
            for occ in self.terms:
                basis.check_occupation(occ)

    @classmethod
    def vacuum(cls, basis: FockBasis) -> "FockState":
        return cls(basis, {(0,) * len(basis.modes): 1.0 + 0j}, check=False)

    def norm_sq(self) -> float:
        return sum(abs(a) ** 2 for a in self.terms.values())

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def amplitude(self, occ: tuple[int, ...]) -> complex:
        return self.terms.get(tuple(occ), 0j)

    def occupation(self, occ: tuple[int, ...], label: ModeLabel) -> int:
        return occ[self.basis.index[label]]

    def pruned(self, threshold: float = PRUNE_THRESHOLD) -> "FockState":
        return FockState(
            self.basis,
            {o: a for o, a in self.terms.items() if abs(a) >= threshold},
            check=False,
        )

    def scaled(self, factor: complex) -> "FockState":
        return FockState(
            self.basis, {o: a * factor for o, a in self.terms.items()}, check=False
        )

    def normalized(self) -> "FockState":
        n = self.norm()
        if n == 0.0:
            raise FockError("cannot normalize the zero state")
        return self.scaled(1.0 / n)

    def mean_photon(self, label: ModeLabel) -> float:
        i = self.basis.index[label]
        return sum(abs(a) ** 2 * occ[i] for occ, a in self.terms.items())

    def photon_moments(self, label: ModeLabel) -> tuple[float, float]:
        """Returns (<n>, <n(n-1)>) for one mode."""
        i = self.basis.index[label]
        m1 = m2 = 0.0
        for occ, a in self.terms.items():
            p = abs(a) ** 2
            n = occ[i]
            m1 += p * n
            m2 += p * n * (n - 1)
        return m1, m2

    def total_photon_distribution(self) -> dict[int, float]:
        idx = self.basis.photonic
        out: dict[int, float] = {}
        for occ, a in self.terms.items():
            n = sum(occ[i] for i in idx)
            out[n] = out.get(n, 0.0) + abs(a) ** 2
        return out

    def reduced_density(self, label: ModeLabel) -> np.ndarray:
        """Single-mode reduced density matrix, tracing everything else."""
        i = self.basis.index[label]
        dim = self.basis.cap(i) + 1
        rho = np.zeros((dim, dim), dtype=complex)
        groups: dict[tuple, dict[int, complex]] = {}
        for occ, a in self.terms.items():
            rest = occ[:i] + occ[i + 1:]
            groups.setdefault(rest, {})[occ[i]] = a
        for amps in groups.values():
            for m, am in amps.items():
                for n, an in amps.items():
                    rho[m, n] += am * np.conj(an)
        return rho

    def to_json(self) -> str:
        """Debug dump: list of {occupation, re, im}, deterministic order."""
        rows = [
            {"occupation": list(occ), "re": a.real, "im": a.imag}
            for occ, a in sorted(self.terms.items())
        ]
        return json.dumps({"modes": [repr(m) for m in self.basis.modes],
                           "n_max": self.basis.n_max, "terms": rows})


class ModeNetwork:
    """Unitary over an ordered list of photonic modes, columns = inputs.

    Input and output label lists may differ (time-bin delays rename bins);
    causality requires every nonzero entry to satisfy
    ``out.timebin >= in.timebin``.
    """

    def __init__(self, in_labels: Sequence[ModeLabel],
                 out_labels: Sequence[ModeLabel], matrix: np.ndarray):
        in_labels = tuple(in_labels)
        out_labels = tuple(out_labels)
        matrix = np.asarray(matrix, dtype=complex)
        n = len(in_labels)
        if len(out_labels) != n or matrix.shape != (n, n):
            raise FockError("network matrix must be square over its labels")
        if len(set(in_labels)) != n or len(set(out_labels)) != n:
            raise FockError("duplicate labels in network")
        for lab in in_labels + out_labels:
            if lab.kind != PHOTONIC:
                raise FockError("ancilla modes may not enter a mode unitary")
        dev = np.max(np.abs(matrix.conj().T @ matrix - np.eye(n)))
        if dev >= UNITARITY_TOL:
            raise FockError(f"matrix is not unitary (deviation {dev:.3e})")
        rows, cols = np.nonzero(np.abs(matrix) > 1e-14)
        for i, j in zip(rows, cols):
            if out_labels[i].timebin < in_labels[j].timebin:
                raise FockError(
                    f"acausal entry {in_labels[j]} -> {out_labels[i]}"
                )
        self.in_labels = in_labels
        self.out_labels = out_labels
        self.matrix = matrix
        self.matrix.setflags(write=False)

    def unitarity_deviation(self) -> float:
        n = len(self.in_labels)
        return float(np.max(np.abs(self.matrix.conj().T @ self.matrix - np.eye(n))))


def identity_network(labels: Sequence[ModeLabel]) -> ModeNetwork:
    labels = tuple(labels)
    return ModeNetwork(labels, labels, np.eye(len(labels), dtype=complex))


def splitter(in1: ModeLabel, in2: ModeLabel, out1: ModeLabel, out2: ModeLabel,
             transmission: float = 0.5) -> ModeNetwork:
    """Symmetric beamsplitter: out1 = sqrt(T) in1 + i sqrt(R) in2."""
    t = math.sqrt(transmission)
    r = math.sqrt(1.0 - transmission)
    m = np.array([[t, 1j * r], [1j * r, t]], dtype=complex)
    return ModeNetwork((in1, in2), (out1, out2), m)


def phase_delay(in_label: ModeLabel, out_label: ModeLabel, phi: float) -> ModeNetwork:
    """Single-mode phase, optionally renaming into a later time bin."""
    m = np.array([[np.exp(1j * phi)]], dtype=complex)
    return ModeNetwork((in_label,), (out_label,), m)


def dft_network(in_labels: Sequence[ModeLabel], out_labels: Sequence[ModeLabel]
                ) -> ModeNetwork:
    """Discrete-Fourier multiport: U[j, k] = exp(2 pi i j k / n) / sqrt(n)."""
    n = len(in_labels)
    j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    m = np.exp(2j * np.pi * j * k / n) / math.sqrt(n)
    return ModeNetwork(in_labels, out_labels, m)


def direct_sum(*nets: ModeNetwork) -> ModeNetwork:
    ins: list[ModeLabel] = []
    outs: list[ModeLabel] = []
    for net in nets:
        ins.extend(net.in_labels)
        outs.extend(net.out_labels)
    n = len(ins)
    m = np.zeros((n, n), dtype=complex)
    row = col = 0
    for net in nets:
        k = len(net.in_labels)
        m[row:row + k, col:col + k] = net.matrix
        row += k
        col += k
    return ModeNetwork(ins, outs, m)


def pad(net: ModeNetwork, labels: Sequence[ModeLabel]) -> ModeNetwork:
    """Extend with identity pass-through on extra labels."""
    labels = tuple(labels)
    if not labels:
        return net
    return direct_sum(net, identity_network(labels))


def compose(first: ModeNetwork, then: ModeNetwork) -> ModeNetwork:
    """Sequential composition, auto-padding pass-through modes.

    Labels ``then`` consumes but ``first`` does not produce become extra
    inputs of ``first`` (identity); labels ``first`` produces but ``then``
    does not consume pass through ``then`` unchanged.
    """
    a = pad(first, [l for l in then.in_labels if l not in set(first.out_labels)])
    b = pad(then, [l for l in a.out_labels if l not in set(then.in_labels)])
    if set(a.out_labels) != set(b.in_labels):
        missing = set(b.in_labels) - set(a.out_labels)
        raise FockError(f"cannot align composition, unmatched labels {missing}")
    perm = np.zeros((len(b.in_labels), len(a.out_labels)), dtype=complex)
    pos = {lab: i for i, lab in enumerate(a.out_labels)}
    for i, lab in enumerate(b.in_labels):
        perm[i, pos[lab]] = 1.0
    return ModeNetwork(a.in_labels, b.out_labels, b.matrix @ perm @ a.matrix)


def _givens_decompose(u: np.ndarray):
    """Reduce u to diagonal d with two-mode rotations.

    Returns (rotations, d) with rotations = [(i, j, g), ...] such that
    u = g_1^† g_2^† ... g_K^† diag(d), each g embedding a 2x2 block on
    rows/cols (i, j).
    """
    m = u.shape[0]
    work = u.astype(complex).copy()
    rotations = []
    for col in range(m - 1):
        for row in range(m - 1, col, -1):
            a = work[row - 1, col]
            b = work[row, col]
            if abs(b) < 1e-16:
                continue
            r = math.hypot(abs(a), abs(b))
            g = np.array([[np.conj(a) / r, np.conj(b) / r],
                          [-b / r, a / r]], dtype=complex)
            work[[row - 1, row], :] = g @ work[[row - 1, row], :]
            rotations.append((row - 1, row, g))
    d = np.diagonal(work).copy()
    return rotations, d


@lru_cache(maxsize=4096)
def _binomial_table(n_p: int, n_q: int):
    return [
        [(j, math.comb(n_p, j) * math.comb(n_q, k - j))
         for j in range(max(0, k - n_q), min(n_p, k) + 1)]
        for k in range(n_p + n_q + 1)
    ]


def _apply_two_mode(terms: dict, i: int, j: int, g: np.ndarray) -> dict:
    """Lift a 2x2 mode unitary on positions (i, j) to the Fock basis."""
    g00, g01 = g[0, 0], g[0, 1]
    g10, g11 = g[1, 0], g[1, 1]
    out: dict[tuple[int, ...], complex] = {}
    for occ, amp in terms.items():
        n_p, n_q = occ[i], occ[j]
        if n_p == 0 and n_q == 0:
            out[occ] = out.get(occ, 0j) + amp
            continue
        base = amp / math.sqrt(math.factorial(n_p) * math.factorial(n_q))
        ntot = n_p + n_q
        rows = _binomial_table(n_p, n_q)
        for k in range(ntot + 1):
            coeff = 0j
            for jj, binom in rows[k]:
                coeff += (binom * g00 ** jj * g10 ** (n_p - jj)
                          * g01 ** (k - jj) * g11 ** (n_q - k + jj))
            if coeff == 0:
                continue
            coeff *= base * math.sqrt(
                math.factorial(k) * math.factorial(ntot - k))
            new = list(occ)
            new[i] = k
            new[j] = ntot - k
            key = tuple(new)
            out[key] = out.get(key, 0j) + coeff
    return {o: a for o, a in out.items() if abs(a) >= PRUNE_THRESHOLD}


def apply_network(state: FockState, net: ModeNetwork) -> FockState:
    """Evolve a state by the multi-photon lift of a mode unitary.

    The unitary is decomposed into two-mode Givens rotations plus a
    diagonal phase layer, applied sequentially.  Ancilla amplitudes are
    untouched; the norm is preserved to 1e-12.  Photons in modes outside
    ``net.in_labels`` are an error, as is any truncation overflow.
    """
    basis = state.basis
    net_set = set(net.in_labels)
    state_ph = [basis.modes[i] for i in basis.photonic]
    for lab in state_ph:
        if lab not in net_set:
            raise FockError(f"state mode {lab} not an input of the network")

    anc_labels = [basis.modes[i] for i in basis.ancilla]
    new_modes = list(net.out_labels) + anc_labels
    new_basis = FockBasis(new_modes, basis.n_max)

    n_ph = len(net.in_labels)
    pos = {lab: k for k, lab in enumerate(net.in_labels)}
    src_idx = [None] * n_ph
    for lab in state_ph:
        src_idx[pos[lab]] = basis.index[lab]
    anc_idx = list(basis.ancilla)

    terms: dict[tuple[int, ...], complex] = {}
    for occ, amp in state.terms.items():
        phot = tuple(0 if s is None else occ[s] for s in src_idx)
        key = phot + tuple(occ[i] for i in anc_idx)
        terms[key] = terms.get(key, 0j) + amp

    rotations, diag = _givens_decompose(net.matrix)
    # u = g_1^† ... g_K^† diag: apply diag first, then rotations in reverse.
    out: dict[tuple[int, ...], complex] = {}
    for occ, amp in terms.items():
        f = amp
        for k in range(n_ph):
            if occ[k]:
                f *= diag[k] ** occ[k]
        out[occ] = f
    for i, j, g in reversed(rotations):
        out = _apply_two_mode(out, i, j, g.conj().T)

    before = state.norm_sq()
    result = FockState(new_basis, out, check=True)
    if abs(result.norm_sq() - before) > 1e-12 * max(1.0, before):
        raise FockError("norm not preserved by network application")
    return result


def ryser_permanent(a: np.ndarray) -> complex:
    """Exact permanent via Ryser's formula with Gray-code updates."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0j
    if a.shape != (n, n):
        raise ValueError("permanent requires a square matrix")
    row_sums = np.zeros(n, dtype=complex)
    total = 0j
    prev_gray = 0
    sign = 1
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        changed = gray ^ prev_gray
        col = changed.bit_length() - 1
        if gray & changed:
            row_sums += a[:, col]
        else:
            row_sums -= a[:, col]
        prev_gray = gray
        sign = -sign
        total += sign * np.prod(row_sums)
    if n % 2:
        total = -total
    return complex(total)


def _repeat_indices(occ: Sequence[int]) -> list[int]:
    out = []
    for i, n in enumerate(occ):
        out.extend([i] * n)
    return out


def amplitude_oracle(net: ModeNetwork, in_occ: Sequence[int],
                     out_occ: Sequence[int]) -> complex:
    """Transition amplitude via an exact permanent; independent of
    :func:`apply_network`.

    ``in_occ`` / ``out_occ`` are occupation sequences aligned with
    ``net.in_labels`` / ``net.out_labels``.
    """
    in_occ = tuple(in_occ)
    out_occ = tuple(out_occ)
    if len(in_occ) != len(net.in_labels) or len(out_occ) != len(net.out_labels):
        raise FockError("occupation length does not match network labels")
    n_in = sum(in_occ)
    n_out = sum(out_occ)
    if n_in != n_out:
        raise FockError("photon number mismatch between input and output")
    rows = _repeat_indices(out_occ)
    cols = _repeat_indices(in_occ)
    sub = net.matrix[np.ix_(rows, cols)]
    perm = ryser_permanent(sub)
    norm = 1.0
    for n in in_occ:
        norm *= math.factorial(n)
    for n in out_occ:
        norm *= math.factorial(n)
    return perm / math.sqrt(norm)


def postselect(state: FockState,
               predicate: Callable[[Mapping[ModeLabel, int]], bool]
               ) -> tuple[FockState, float]:
    """Condition on a predicate over occupation vectors.

    Returns (renormalized conditional state, selection probability).
    A zero-probability selection raises :class:`PostselectionError`.
    """
    modes = state.basis.modes
    kept: dict[tuple[int, ...], complex] = {}
    prob = 0.0
    for occ, amp in state.terms.items():
        view = dict(zip(modes, occ))
        if predicate(view):
            kept[occ] = amp
            prob += abs(amp) ** 2
    if prob <= 0.0:
        raise PostselectionError("post-selection has zero probability")
    scale = 1.0 / math.sqrt(prob)
    cond = FockState(state.basis, {o: a * scale for o, a in kept.items()},
                     check=False)
    return cond, prob


def detection_probability(state: FockState,
                          pattern: Mapping[ModeLabel, bool]) -> float:
    """Threshold-detector outcome probability.

    ``pattern`` maps detector modes to click (True, >= 1 photon) or
    no-click (False, 0 photons); unconstrained modes and ancillas are
    traced over.
    """
    idx = []
    for lab, want in pattern.items():
        if lab not in state.basis.index:
            raise FockError(f"pattern references unknown mode {lab}")
        idx.append((state.basis.index[lab], want))
    prob = 0.0
    for occ, amp in state.terms.items():
        ok = True
        for i, want in idx:
            if want != (occ[i] >= 1):
                ok = False
                break
        if ok:
            prob += abs(amp) ** 2
    return prob


def number_correlation(state: FockState,
                       labels: Sequence[ModeLabel]) -> float:
    """Expectation of the product of number operators over ``labels``.

    For distinct output modes this is the photon-flux coincidence rate
    (what linear detectors measure at low flux); for a single label it is
    the mean photon number.  Repeated labels multiply n, not n(n-1).
    """
    idx = []
    for lab in labels:
        if lab not in state.basis.index:
            raise FockError(f"unknown mode {lab}")
        idx.append(state.basis.index[lab])
    total = 0.0
    for occ, amp in state.terms.items():
        w = 1
        for i in idx:
            w *= occ[i]
            if w == 0:
                break
        if w:
            total += abs(amp) ** 2 * w
    return total
