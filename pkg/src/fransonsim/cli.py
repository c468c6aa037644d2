"""Command-line front end.

All data goes to files or stdout; diagnostics go to stderr.  Exit codes:
0 success, 1 configuration error, 2 runtime error.  Configuration is a
single JSON document plus ``--set key=value`` overrides (dotted paths,
JSON-typed values); unknown keys are errors, not warnings.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from .analytics import chsh as chsh_estimator
from .correlator import coincidences_at, cross_correlate, normalize_g2
from .montecarlo import CHANNELS, RunConfig, generate
from .pipeline import Experiment, ExperimentError, run as run_experiment
from .source import power_calibration
from .tagio import TagFileError, read_tags, write_qtt

_TIME_UNITS = {"ps": 1.0, "ns": 1e3, "us": 1e6, "ms": 1e9, "s": 1e12}


class ConfigError(ValueError):
    pass


def parse_time_ps(text: str) -> int:
    """'100ps', '10ns', '1.07us', or a bare picosecond integer."""
    m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+)\s*(ps|ns|us|ms|s)?\s*", str(text))
    if not m:
        raise ConfigError(f"cannot parse time {text!r}")
    value = float(m.group(1)) * _TIME_UNITS[m.group(2) or "ps"]
    ps = int(round(value))
    if abs(value - ps) > 1e-6:
        raise ConfigError(f"{text!r} is not on the 1 ps grid")
    return ps


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError as err:
        raise ConfigError(f"config not found: {path}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"bad JSON in {path}: {err}") from err


def _apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {key!r} crosses a leaf")
        node[parts[-1]] = value
    return cfg


_EXPERIMENT_KEYS = {
    "map": {"q", "beta", "phi_b", "phi_grid", "n_phi", "lags",
            "normalization"},
    "fringes": {"q", "beta", "phi_b", "phi_grid", "n_phi", "duration_s",
                "window_ps"},
    "chsh": {"q", "beta", "duration_s", "window_ps"},
    "sweep": {"q", "beta_grid"},
    "multiport": {"n_grid"},
}
_EXPERIMENT_KIND = {
    "map": "g2_map",
    "fringes": "fringe_scan",
    "chsh": "chsh_table",
    "sweep": "background_sweep",
    "multiport": "multiport_postselect",
}


def _check_keys(cfg: dict, allowed: set, context: str):
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown {context} keys: {sorted(unknown)}")


def _cmd_experiment(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args.set)
    command = args.command
    allowed = _EXPERIMENT_KEYS[command] | {"mode", "seed"}
    _check_keys(cfg, allowed, command)
    mode = args.mode or cfg.pop("mode", "analytic")
    seed = args.seed if args.seed is not None else cfg.pop("seed", None)
    exp = Experiment(_EXPERIMENT_KIND[command], Path(args.out), mode=mode,
                     params=cfg, seed=seed)
    results = run_experiment(exp)
    summary = {"kind": exp.kind, "out_dir": str(exp.out_dir),
               "comparisons": results.get("comparisons", [])}
    for key in ("analytic", "montecarlo"):
        if isinstance(results.get(key), dict) and "S" in results[key]:
            summary[f"S_{key}"] = results[key]["S"]
    json.dump(summary, sys.stdout, indent=1, default=str)
    sys.stdout.write("\n")
    return 0


def _cmd_tags(args) -> int:
    cfg_dict = _apply_overrides(_load_config(args.config), args.set)
    cfg = RunConfig.from_json_dict(cfg_dict)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    streams, stats = generate(cfg)
    write_qtt(out / "tags.qtt", streams)
    for channel in CHANNELS:
        write_qtt(out / f"tags_{channel}.qtt", {channel: streams[channel]})
    with open(out / "stats.json", "w") as f:
        json.dump(stats, f, indent=1, sort_keys=True)
        f.write("\n")
    print(json.dumps({"out_dir": str(out),
                      "counts": stats["detected_counts"]}))
    return 0


def _pick_stream(path: str, channel: str | None):
    streams = read_tags(path)
    if channel is not None:
        if channel not in streams:
            raise ConfigError(f"{path} has no channel {channel!r}")
        return streams[channel]
    populated = [s for s in streams.values() if len(s)]
    if len(populated) == 1:
        return populated[0]
    raise ConfigError(
        f"{path} holds {len(populated)} populated channels; use --channel-a/"
        f"--channel-b to pick one")


def _cmd_correlate(args) -> int:
    x = _pick_stream(args.a, args.channel_a)
    y = _pick_stream(args.b, args.channel_b)
    bw = parse_time_ps(args.bin)
    max_lag = parse_time_ps(args.max_lag)
    if max_lag % bw:
        max_lag -= max_lag % bw
        print(f"note: max lag truncated to {max_lag} ps "
              f"(multiple of bin width)", file=sys.stderr)
    hist = cross_correlate(x, y, bw, max_lag)
    if args.g2:
        normalize_g2(hist)
    out = Path(args.out) if args.out else None
    if out:
        hist.write_csv(out)
        if args.g2:
            hist.write_json(out.with_suffix(".json"))
        print(json.dumps({"histogram": str(out),
                          "pairs": int(hist.counts.sum())}))
    else:
        w = sys.stdout
        w.write("lag_ps,count\n")
        for lag, c in zip(hist.lags_ps, hist.counts):
            w.write(f"{int(lag)},{int(c)}\n")
    return 0


def _cmd_chsh_from_tags(args) -> int:
    """Build the 16-count CHSH estimate from four per-setting tag files."""
    window = parse_time_ps(args.window)
    settings = []
    counts = {}
    for item in args.run:
        try:
            pa, pb, path = item.split(":", 2)
            setting = (float(pa), float(pb))
        except ValueError as err:
            raise ConfigError(
                f"--run wants phiA:phiB:path, got {item!r}") from err
        streams = read_tags(path)
        per = {}
        for da in ("A1", "A2"):
            for db in ("B1", "B2"):
                per[(da, db)] = coincidences_at(streams[da], streams[db],
                                                0, window)
        counts[setting] = per
        settings.append(setting)
    phis_a = sorted({s[0] for s in settings})
    phis_b = sorted({s[1] for s in settings})
    if len(phis_a) != 2 or len(phis_b) != 2 or len(settings) != 4:
        raise ConfigError("need exactly 4 runs over a 2x2 setting grid")
    res = chsh_estimator(counts, (tuple(phis_a), tuple(phis_b)))
    payload = res.to_json_dict()
    if args.out:
        with open(args.out, "w") as f:
            json.dump(payload, f, indent=1)
            f.write("\n")
    json.dump({"S": res.s, "sigma_S": res.sigma_s}, sys.stdout)
    sys.stdout.write("\n")
    return 0


def _cmd_calibrate(args) -> int:
    power = power_calibration(args.nbar, args.t1_ps * 1e-12,
                              args.nu_thz * 1e12)
    print(f"{power:.4g} W")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fransonsim",
        description="Time-bin entanglement simulation and analysis")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def experiment_sub(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="config override (dotted path, JSON value)")
        sp.add_argument("--mode", choices=("analytic", "montecarlo", "both"))
        sp.add_argument("--seed", type=int)
        sp.add_argument("-o", "--out", default=".",
                        help="output directory (default: current)")
        sp.set_defaults(func=_cmd_experiment)
        return sp

    experiment_sub("map", "coincidence map over (phase, lag)")
    experiment_sub("fringes", "lag-0 fringe scan and visibility fit")
    experiment_sub("chsh", "CHSH table (S, sigma_S, E values)")
    experiment_sub("sweep", "S vs laser-background sweep")
    experiment_sub("multiport", "multiport post-selection probabilities")

    sp = sub.add_parser("tags", help="generate Monte-Carlo time-tag streams")
    sp.add_argument("--config", help="run config JSON")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE")
    sp.add_argument("-o", "--out", default=".", help="output directory")
    sp.set_defaults(func=_cmd_tags)

    sp = sub.add_parser("correlate", help="cross-correlate two tag files")
    sp.add_argument("--a", required=True, help="first tag file")
    sp.add_argument("--b", required=True, help="second tag file")
    sp.add_argument("--bin", default="100ps", help="lag bin width")
    sp.add_argument("--max-lag", default="10ns", help="maximum |lag|")
    sp.add_argument("--channel-a", choices=CHANNELS)
    sp.add_argument("--channel-b", choices=CHANNELS)
    sp.add_argument("--g2", action="store_true",
                    help="attach rate-normalized g2")
    sp.add_argument("-o", "--out", help="histogram CSV path (default stdout)")
    sp.set_defaults(func=_cmd_correlate)

    sp = sub.add_parser("chsh-tags",
                        help="CHSH from four per-setting tag files")
    sp.add_argument("--run", action="append", required=True,
                    metavar="PHIA:PHIB:FILE")
    sp.add_argument("--window", default="267ps", help="coincidence window")
    sp.add_argument("-o", "--out", help="result JSON path")
    sp.set_defaults(func=_cmd_chsh_from_tags)

    sp = sub.add_parser("calibrate", help="excitation power from nbar")
    sp.add_argument("--nbar", type=float, required=True)
    sp.add_argument("--t1-ps", type=float, default=67.2)
    sp.add_argument("--nu-thz", type=float, default=329.14)
    sp.set_defaults(func=_cmd_calibrate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return 1 if (err.code or 0) != 0 else 0
    try:
        return args.func(args)
    except (ConfigError, TagFileError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (ExperimentError, OSError, FloatingPointError) as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return 2


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
