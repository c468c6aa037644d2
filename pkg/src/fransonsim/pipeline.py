"""End-to-end experiment orchestration.

Each experiment kind maps onto one of the published figures/tables:
coincidence maps, fringe scans with visibility fits, the CHSH table, the
background sweep, the baseline factorization study, and the multiport
post-selection probability.  Every run writes a results JSON, data CSVs,
a markdown comparison against the anchor table, and a manifest (config
hash + versions) that reproduces analytic outputs byte-identically and
Monte-Carlo outputs statistically.

Anchor policy: shape laws with principled tolerances are pass/fail
("match"/"mismatch"); numbers that depend on lab calibration we cannot
model are compared report-only, never an unfailable "pass".
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import (CHSH_SETTINGS, baseline_factorization_residual,
                        baseline_visibilities, chsh, coincidence_rate,
                        exact_chsh, fit_fringe, g2_map, s_crossover,
                        s_vs_background, superbunching_ratio)
from .correlator import coincidences_at
from .interferometer import FransonConfig, multiport_postselect_probability
from .montecarlo import RunConfig, generate
from .source import SourceParams

KINDS = ("g2_map", "fringe_scan", "chsh_table", "background_sweep",
         "baseline_study", "multiport_postselect")
MODES = ("analytic", "montecarlo", "both")


@dataclass(frozen=True)
class Anchor:
    value: float
    sigma: float | None
    citation: str
    policy: str = "match"   # "match" -> pass/fail; "report-only" -> never fails


PUBLISHED_ANCHORS: dict[str, Anchor] = {
    "visibility": Anchor(0.928, 0.026,
                         'fringe visibility "92.8 +/- 2.6%"'),
    "chsh_s": Anchor(2.675, 0.050,
                     'Bell parameter S = 2.675 +/- 0.050, "exceeds the '
                     'classical bound 2"'),
    "g2_zero": Anchor(0.037, 0.003,
                      "HBT antibunching g2(0) = 0.037 +/- 0.003"),
    "s_at_high_background": Anchor(1.344, 0.019,
                                   "S = 1.344 +/- 0.019 at g2(0) = 0.67 "
                                   "+/- 0.01 (strong laser background)"),
    "crossover_g2": Anchor(0.2, None,
                           'classical boundary crossed at g2(0) of '
                           '"approximately 0.2"', policy="report-only"),
    "crossover_laser_fraction": Anchor(0.43, None,
                                       'laser background "constitutes 43% '
                                       'of the total" at the crossover',
                                       policy="report-only"),
    "tripartite_probability": Anchor(0.22, 0.005,
                                     "three-party post-selection "
                                     "probability ~ 0.22 (n!/n^n)"),
}


@dataclass
class Experiment:
    kind: str
    out_dir: Path
    mode: str = "analytic"
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode in ("montecarlo", "both") and self.seed is None:
            raise ValueError("Monte-Carlo mode requires a seed")
        for key, val in self.params.items():
            if key.endswith("_grid") and len(val) == 0:
                raise ValueError(f"empty grid {key!r}")
        self.out_dir = Path(self.out_dir)


def compare_to_anchor(value: float, sigma: float, anchor_id: str,
                      note: str | None = None,
                      force_report_only: bool = False) -> dict:
    """Status row against one published anchor.

    match: |value - anchor| <= 3 combined sigma; mismatch otherwise;
    report-only anchors never fail (no principled tolerance available).
    ``force_report_only`` demotes a pass/fail anchor for values that are
    not commensurable with the measurement (e.g. ideal-model bounds).
    """
    if anchor_id not in PUBLISHED_ANCHORS:
        raise KeyError(f"unknown anchor {anchor_id!r}")
    a = PUBLISHED_ANCHORS[anchor_id]
    row = {"anchor": anchor_id, "published_value": a.value, "published_sigma": a.sigma,
           "citation": a.citation, "value": float(value),
           "sigma": float(sigma)}
    if note:
        row["note"] = note
    if a.policy == "report-only" or force_report_only:
        row["status"] = "report-only"
        return row
    combined = math.sqrt((sigma or 0.0) ** 2 + (a.sigma or 0.0) ** 2)
    if combined == 0.0:
        ok = abs(value - a.value) < 1e-9
    else:
        ok = abs(value - a.value) <= 3.0 * combined
    row["status"] = "match" if ok else "mismatch"
    return row


def _config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def _versions() -> dict:
    import numba
    import scipy
    return {"fransonsim": __version__, "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def _source_from_params(params: dict) -> SourceParams:
    return SourceParams(q=float(params.get("q", 0.05)),
                        beta=float(params.get("beta", 0.0)))


def _run_setting(params: dict, phi_a: float, phi_b: float, seed: int,
                 duration: float) -> dict:
    cfg = RunConfig(duration=duration,
                    source=_source_from_params(params),
                    franson=FransonConfig(phi_a=phi_a, phi_b=phi_b),
                    seed=seed)
    streams, _ = generate(cfg)
    return streams


def _mc_pair_counts(streams: dict, window_ps: int = 267) -> dict:
    per = {}
    for da in ("A1", "A2"):
        for db in ("B1", "B2"):
            per[(da, db)] = coincidences_at(streams[da], streams[db],
                                            0, window_ps)
    return per


class ExperimentError(RuntimeError):
    pass


def run(exp: Experiment) -> dict:
    """Execute one experiment; returns the results dict after writing
    the artifact bundle into ``exp.out_dir``."""
    exp.out_dir.mkdir(parents=True, exist_ok=True)
    params = dict(exp.params)
    try:
        handler = _HANDLERS[exp.kind]
        results, comparisons = handler(exp, params)
    except (ValueError, KeyError, FloatingPointError) as err:
        raise ExperimentError(f"{exp.kind}: {err}") from err

    results["kind"] = exp.kind
    results["mode"] = exp.mode
    _write_json(exp.out_dir / "results.json", results)
    _write_comparisons(exp.out_dir / "comparisons.md", exp, comparisons)
    manifest = {
        "kind": exp.kind, "mode": exp.mode, "params": params,
        "seed": exp.seed, "versions": _versions(),
        "config_hash": _config_hash({"kind": exp.kind, "mode": exp.mode,
                                     "params": params, "seed": exp.seed}),
    }
    _write_json(exp.out_dir / "manifest.json", manifest)
    results["comparisons"] = comparisons
    return results


def _write_json(path: Path, payload: dict):
    with open(path, "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True, default=_jsonable)
        f.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_comparisons(path: Path, exp: Experiment, rows: list[dict]):
    with open(path, "w") as f:
        f.write(f"# {exp.kind} ({exp.mode}) vs published anchors\n\n")
        if not rows:
            f.write("No anchors apply to this experiment.\n")
            return
        f.write("| anchor | published | model | status | citation |\n")
        f.write("|---|---|---|---|---|\n")
        for r in rows:
            published = f"{r['published_value']}"
            if r["published_sigma"] is not None:
                published += f" +/- {r['published_sigma']}"
            model = f"{r['value']:.6g}"
            if r["sigma"]:
                model += f" +/- {r['sigma']:.2g}"
            f.write(f"| {r['anchor']} | {published} | {model} | {r['status']} "
                    f"| {r['citation']} |\n")


# --------------------------------------------------------------------------
# kind handlers


def _phi_grid(params: dict, key: str = "phi_grid", n_default: int = 13):
    if key in params:
        return [float(v) for v in params[key]]
    n = int(params.get("n_phi", n_default))
    return list(np.linspace(0.0, 2 * math.pi, n))


def _do_g2_map(exp: Experiment, params: dict):
    q = float(params.get("q", 0.05))
    beta = float(params.get("beta", 0.0))
    phi_b = float(params.get("phi_b", 0.0))
    cmap = g2_map(_phi_grid(params), phi_b, q, beta,
                  lags=params.get("lags", (-2, -1, 0, 1, 2)),
                  normalization=params.get("normalization", "max"))
    cmap.to_csv(exp.out_dir / "map.csv")
    results = {"map": cmap.to_json_dict()}
    return results, []


def _do_fringe_scan(exp: Experiment, params: dict):
    q = float(params.get("q", 0.05))
    beta = float(params.get("beta", 0.0))
    phi_b = float(params.get("phi_b", 0.0))
    grid = _phi_grid(params)
    results: dict = {"q": q, "beta": beta, "phi_b": phi_b}
    comparisons = []

    if exp.mode in ("analytic", "both"):
        pts = [(pa, coincidence_rate(q, beta, pa, phi_b, lag=0))
               for pa in grid]
        fit = fit_fringe(pts, phi_b)
        results["analytic"] = {"points": pts, "visibility": fit.visibility,
                               "visibility_err": fit.visibility_err}
        comparisons.append(compare_to_anchor(fit.visibility,
                                             fit.visibility_err,
                                             "visibility"))
    if exp.mode in ("montecarlo", "both"):
        duration = float(params.get("duration_s", 1.07e-3))
        window_ps = int(params.get("window_ps", 267))
        pts = []
        for i, pa in enumerate(grid):
            streams = _run_setting(params, pa, phi_b, exp.seed + i, duration)
            pts.append((pa, float(coincidences_at(streams["A1"],
                                                  streams["B1"], 0,
                                                  window_ps))))
        fit = fit_fringe(pts, phi_b)
        results["montecarlo"] = {"points": pts, "visibility": fit.visibility,
                                 "visibility_err": fit.visibility_err}
        comparisons.append(compare_to_anchor(fit.visibility,
                                             fit.visibility_err,
                                             "visibility"))
    with open(exp.out_dir / "fringes.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["mode", "phi_a", "value"])
        for mode in ("analytic", "montecarlo"):
            if mode in results:
                for pa, v in results[mode]["points"]:
                    w.writerow([mode, f"{pa:.10g}", f"{v:.12g}"])
    return results, comparisons


def _do_chsh_table(exp: Experiment, params: dict):
    q = float(params.get("q", 0.05))
    beta = float(params.get("beta", 0.0))
    results: dict = {"q": q, "beta": beta,
                     "settings": [list(s) for s in CHSH_SETTINGS]}
    comparisons = []
    if exp.mode in ("analytic", "both"):
        res = exact_chsh(q, beta)
        results["analytic"] = res.to_json_dict()
        # exact model rates carry no statistical error; an ideal-model S
        # is an upper bound for the measurement, not an estimate of it
        comparisons.append(compare_to_anchor(
            res.s, 0.0, "chsh_s",
            note="model-ideal upper bound" if beta == 0.0 else None,
            force_report_only=(beta == 0.0)))
    if exp.mode in ("montecarlo", "both"):
        duration = float(params.get("duration_s", 1.07e-3))
        window_ps = int(params.get("window_ps", 267))
        (a, a2), (b, b2) = CHSH_SETTINGS
        counts = {}
        i = 0
        for sa in (a, a2):
            for sb in (b, b2):
                streams = _run_setting(params, sa, sb, exp.seed + i, duration)
                counts[(sa, sb)] = _mc_pair_counts(streams, window_ps)
                i += 1
        res = chsh(counts)
        results["montecarlo"] = res.to_json_dict()
        comparisons.append(compare_to_anchor(res.s, res.sigma_s, "chsh_s"))
    return results, comparisons


def _do_background_sweep(exp: Experiment, params: dict):
    q = float(params.get("q", 0.05))
    betas = params.get("beta_grid",
                       [0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    rows = s_vs_background([float(b) for b in betas], q)
    cross = s_crossover(rows)
    with open(exp.out_dir / "sweep.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["beta", "g2_0", "S"])
        for r in rows:
            w.writerow([f"{r['beta']:.10g}", f"{r['g2_0']:.10g}",
                        f"{r['S']:.10g}"])
    results = {"q": q, "rows": rows, "crossover": cross}
    comparisons = []
    if cross is not None:
        comparisons.append(compare_to_anchor(cross["g2_0"], 0.0,
                                             "crossover_g2"))
        comparisons.append(compare_to_anchor(cross["beta"], 0.0,
                                             "crossover_laser_fraction"))
    # nearest sweep row to the published strong-background point
    target = PUBLISHED_ANCHORS["s_at_high_background"]
    g2_target = 0.67
    nearest = min(rows, key=lambda r: abs(r["g2_0"] - g2_target))
    if abs(nearest["g2_0"] - g2_target) < 0.05:
        comparisons.append(compare_to_anchor(nearest["S"], 0.0,
                                             "s_at_high_background"))
    results["high_background_row"] = nearest
    results["high_background_anchor"] = {"g2_0": g2_target,
                                         "S": target.value}
    return results, comparisons


def _do_baseline_study(exp: Experiment, params: dict):
    q = float(params.get("q", 0.05))
    beta = float(params.get("beta", 0.0))
    v_a, v_b = baseline_visibilities(q, beta)
    resid = baseline_factorization_residual(q, beta)
    bunching = superbunching_ratio(q, beta)
    results = {"q": q, "beta": beta, "v_a": v_a, "v_b": v_b,
               "expected_visibility": 1.0 - q,
               "factorization_residual": resid,
               "superbunching_ratio": bunching}
    return results, []


def _do_multiport(exp: Experiment, params: dict):
    ns = [int(n) for n in params.get("n_grid", (3, 4))]
    rows = []
    comparisons = []
    for n in ns:
        p = multiport_postselect_probability(n)
        ideal = math.factorial(n) / n ** n
        rows.append({"n": n, "probability": p, "ideal": ideal})
        if n == 3:
            comparisons.append(compare_to_anchor(p, 0.0,
                                                 "tripartite_probability"))
    with open(exp.out_dir / "multiport.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["n", "probability", "n_factorial_over_n_pow_n"])
        for r in rows:
            w.writerow([r["n"], f"{r['probability']:.12g}",
                        f"{r['ideal']:.12g}"])
    return {"rows": rows}, comparisons


_HANDLERS = {
    "g2_map": _do_g2_map,
    "fringe_scan": _do_fringe_scan,
    "chsh_table": _do_chsh_table,
    "background_sweep": _do_background_sweep,
    "baseline_study": _do_baseline_study,
    "multiport_postselect": _do_multiport,
}
