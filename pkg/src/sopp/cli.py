"""Command-line interface.

Subcommands: analyze, simulate, sweep, optimize-positions, compare.
Parameters come from an optional ``key = value`` file (``--config``) and are
overridden by flags.  Tabular output is CSV on stdout; when an output
directory is given (``--output-dir`` or ``$SOPP_OUTPUT_DIR``) the CSV is also
written there together with a JSON run manifest.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from . import __version__
from . import experiments as ex
from . import gf_analysis as gf
from .channel import LinkBudget, Topology, db_to_linear, hop_probabilities
from .errors import InvalidInputError, SoppError, UnsupportedConfigurationError
from .simulator import PROTOCOLS, SimConfig, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSUPPORTED = 3
OUTPUT_DIR_ENV = "SOPP_OUTPUT_DIR"

COMMANDS = ("analyze", "simulate", "sweep", "optimize-positions", "compare")

SCHEMAS = {
    "analyze": ["hops", "lambda", "mean_delay", "tau_s"],
    "simulate": ["protocol", "hops", "lambda", "seed", "slots", "delivered", "mean_delay",
                 "delay_ci", "throughput", "dropped", "g000", "g001", "g010"],
    "sweep": ["protocol", "lambda", "mean_delay", "delay_ci", "throughput", "saturated_flag"],
    "optimize-positions": ["gamma_db", "method", "variant", "r1", "r2", "tau_s"],
    "compare": ["hops", "gamma_db", "tau_sopp", "tau_opp", "ratio", "ci"],
}


class ConfigError(SoppError):
    pass


# ------------------------------------------------------------ config keys

def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _buffer(s: str) -> float:
    v = s.strip().lower()
    if v in ("inf", "unbounded"):
        return math.inf
    return float(int(v))


def _floats(s: str) -> List[float]:
    return [float(x) for x in s.split(",") if x.strip()]


def _ints(s: str) -> List[int]:
    return [int(x) for x in s.split(",") if x.strip()]


def _strs(s: str) -> List[str]:
    return [x.strip() for x in s.split(",") if x.strip()]


def _opt_float(s: str) -> Optional[float]:
    return None if s.strip().lower() in ("", "none", "approx") else float(s)


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    check: Optional[Callable[[Any], bool]] = None
    help: str = ""


KEYS: Dict[str, Key] = {
    "hops": Key(int, 2, lambda v: v >= 2, "number of hops N"),
    "protocol": Key(str, "s-opp", lambda v: v in PROTOCOLS, "s-opp | opp | mh"),
    "mh_d": Key(int, 1, lambda v: v >= 1, "MH group spacing d"),
    "lambda": Key(float, 0.2, lambda v: 0.0 <= v <= 1.0, "arrival probability per slot"),
    "saturated": Key(_bool, False, None, "permanently backlogged source"),
    "alpha": Key(float, 3.0, lambda v: v > 0, "path-loss exponent"),
    "gamma_db": Key(float, 8.0, None, "mean single-hop SNR [dB]"),
    "theta_db": Key(float, 3.0, None, "SINR threshold [dB]"),
    "positions": Key(_floats, None, None, "relay positions in (0,1), comma separated"),
    "bs": Key(_buffer, 50.0, lambda v: v >= 1, "source buffer (integer or inf)"),
    "br": Key(int, 50, lambda v: v >= 1, "relay buffer"),
    "slots": Key(int, 1_000_000, lambda v: v >= 1, "simulation horizon"),
    "warmup": Key(int, 10_000, lambda v: v >= 0, "slots discarded from statistics"),
    "seed": Key(int, 0, lambda v: v >= 0, "base PRNG seed"),
    "enforce_a1": Key(_bool, False, None, "receivers at most two hops downstream"),
    "enforce_a2": Key(_bool, False, None, "ignore interferers > 2 hops from receiver"),
    "noise": Key(_bool, True, None, "include thermal noise"),
    "c": Key(_opt_float, None, lambda v: v is None or v >= 0, "three-hop constant C (default: approximation)"),
    "lambdas": Key(_floats, [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35],
                   lambda v: bool(v) and all(0 <= x < 1 for x in v), "lambda grid"),
    "protocols": Key(_strs, ["s-opp", "opp", "mh"], lambda v: bool(v), "protocol list (mh, mh:<d>)"),
    "replications": Key(int, 1, lambda v: v >= 1, "replications per point"),
    "analytic": Key(_bool, False, None, "add closed-form rows to sweeps"),
    "gamma_grid": Key(_floats, [4.0, 6.0, 8.0, 10.0, 12.0, 14.0], lambda v: bool(v), "gamma list [dB]"),
    "method": Key(str, "analytic", lambda v: v in ex.METHODS, "analytic | simulated"),
    "variant": Key(str, "full", lambda v: v in ex.VARIANTS, "full | no-two-hop | no-reuse"),
    "step": Key(float, None, lambda v: v is None or 0 < v < 0.5, "placement grid step"),
    "hops_list": Key(_ints, [4, 5], lambda v: bool(v) and all(2 <= x <= 5 for x in v), "hop counts for compare"),
    "workers": Key(int, 1, lambda v: v >= 1, "parallel worker processes"),
}


def _coerce(key: str, raw: Any, where: str):
    spec = KEYS[key]
    if isinstance(raw, str):
        try:
            val = spec.parse(raw)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{where}: invalid value for `{key}`: {raw!r} ({e})")
    else:
        val = raw
    if spec.check is not None and val is not None and not spec.check(val):
        raise ConfigError(f"{where}: value out of range for `{key}`: {raw!r}")
    return val


def read_config_file(path: str) -> Dict[str, Any]:
    """Parse a key = value file, or the ``config`` block of a run manifest."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    if p.suffix == ".json":
        try:
            data = json.loads(text)["config"]
        except (ValueError, KeyError) as e:
            raise ConfigError(f"{path}: not a run manifest ({e})")
        out = {}
        for k, v in data.items():
            if k.endswith("_linear"):
                continue
            if k not in KEYS:
                raise ConfigError(f"{path}: unknown key `{k}`")
            out[k] = _coerce(k, _unjson(v), f"{path}")
        return out
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected `key = value`, got {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        k = k.replace("-", "_")
        if k not in KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key `{k}`")
        out[k] = _coerce(k, v, f"{path}:{lineno}")
    return out


def _unjson(v):
    if v == "inf":
        return math.inf
    return v


def parse_config(config_file: Optional[str] = None, overrides: Optional[Dict[str, str]] = None) -> Dict[str, Any]:
    """Defaults, then file values, then flag overrides; validated."""
    cfg = {k: spec.default for k, spec in KEYS.items()}
    if config_file:
        cfg.update(read_config_file(config_file))
    for k, v in (overrides or {}).items():
        if k not in KEYS:
            raise ConfigError(f"unknown key `{k}`")
        cfg[k] = _coerce(k, v, f"--{k.replace('_', '-')}")
    if cfg["warmup"] >= cfg["slots"]:
        raise ConfigError(f"`warmup` ({cfg['warmup']}) must be smaller than `slots` ({cfg['slots']})")
    if cfg["protocol"] == "mh" and cfg["mh_d"] > cfg["hops"]:
        raise ConfigError(f"`mh_d` must not exceed `hops` ({cfg['hops']})")
    if cfg["positions"] is not None and len(cfg["positions"]) != cfg["hops"] - 1:
        raise ConfigError(f"`positions` needs {cfg['hops'] - 1} relay positions")
    return cfg


def budget_of(cfg: Dict[str, Any]) -> LinkBudget:
    return LinkBudget(alpha=cfg["alpha"], theta=db_to_linear(cfg["theta_db"]),
                      gamma=db_to_linear(cfg["gamma_db"]))


def topology_of(cfg: Dict[str, Any]) -> Topology:
    if cfg["positions"] is None:
        return Topology.symmetric(cfg["hops"])
    try:
        return Topology((0.0, *cfg["positions"], 1.0))
    except InvalidInputError as e:
        raise ConfigError(f"invalid `positions`: {e}")


def sim_config_of(cfg: Dict[str, Any]) -> SimConfig:
    try:
        return SimConfig(
            topology=topology_of(cfg), budget=budget_of(cfg), protocol=cfg["protocol"],
            mh_d=cfg["mh_d"], lam=cfg["lambda"], saturated=cfg["saturated"], Bs=cfg["bs"],
            Br=cfg["br"], slots=cfg["slots"], warmup=cfg["warmup"], seed=cfg["seed"],
            enforce_A1=cfg["enforce_a1"], enforce_A2=cfg["enforce_a2"], noise_on=cfg["noise"])
    except InvalidInputError as e:
        raise ConfigError(str(e))


# ------------------------------------------------------------------ output

def fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return format(v, ".10g")
    return str(v)


def to_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def manifest(command: str, cfg: Dict[str, Any], outputs: List[str]) -> Dict[str, Any]:
    resolved = {k: ("inf" if isinstance(v, float) and math.isinf(v) else v) for k, v in cfg.items()}
    resolved["gamma_linear"] = db_to_linear(cfg["gamma_db"])
    resolved["theta_linear"] = db_to_linear(cfg["theta_db"])
    return {"command": command, "config": resolved, "seed": cfg["seed"],
            "version": __version__, "outputs": outputs}


# ---------------------------------------------------------------- commands

def cmd_analyze(cfg):
    n = cfg["hops"]
    if n not in (2, 3):
        raise UnsupportedConfigurationError(f"closed-form analysis exists only for N = 2 or 3, got N = {n}")
    probs = hop_probabilities(topology_of(cfg), budget_of(cfg))
    lam = cfg["lambda"]
    if n == 2:
        tau = gf.two_hop_saturation(probs.p10[0], probs.p20[0])
        D = gf.two_hop_delay(lam, probs.p10[0], probs.p20[0])
    else:
        tau = gf.three_hop_saturation(probs)
        D = gf.three_hop_delay(probs, lam, C=cfg["c"])
    return [[n, lam, D, tau]]


def cmd_simulate(cfg):
    c = sim_config_of(cfg)
    s = run(c)
    return [[c.protocol if c.protocol != "mh" else f"mh:{c.mh_d}", c.hops, c.lam, c.seed, c.slots,
             s.delivered_count, s.mean_delay, s.delay_ci, s.throughput, s.dropped_count,
             s.g000, s.g001, s.g010]]


def cmd_sweep(cfg):
    try:
        spec = ex.SweepSpec(tuple(cfg["protocols"]), tuple(cfg["lambdas"]), sim_config_of(cfg),
                            cfg["replications"], cfg["analytic"])
    except InvalidInputError as e:
        raise ConfigError(str(e))
    rows = ex.delay_sweep(spec, workers=cfg["workers"])
    return [[r.protocol, r.lam, r.mean_delay, r.delay_ci, r.throughput, r.saturated] for r in rows]


def cmd_optimize(cfg):
    res = ex.optimize_positions(cfg["gamma_grid"], method=cfg["method"], variant=cfg["variant"],
                                step=cfg["step"], budget=budget_of(cfg),
                                template=sim_config_of({**cfg, "hops": 3, "positions": None}),
                                replications=cfg["replications"], workers=cfg["workers"])
    return [[r.gamma_db, r.method, r.variant, r.r1, r.r2, r.tau_s] for r in res]


def cmd_compare(cfg):
    tmpl = sim_config_of({**cfg, "positions": None})
    rows = []
    for n in cfg["hops_list"]:
        for g in cfg["gamma_grid"]:
            r = ex.compare_gain(g, n, template=tmpl, replications=cfg["replications"],
                                workers=cfg["workers"])
            rows.append([r.hops, r.gamma_db, r.tau_a, r.tau_b, r.ratio, r.ci])
    return rows


HANDLERS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "optimize-positions": cmd_optimize, "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sopp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value file or run manifest (.json)")
        sp.add_argument("--output-dir", help=f"write CSV + manifest here (default ${OUTPUT_DIR_ENV})")
        for k, spec in KEYS.items():
            sp.add_argument("--" + k.replace("_", "-"), dest="opt_" + k, metavar="V", help=spec.help)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("opt_") and v is not None}
    try:
        cfg = parse_config(args.config, overrides)
        rows = HANDLERS[args.command](cfg)
    except ConfigError as e:
        print(f"sopp: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except UnsupportedConfigurationError as e:
        print(f"sopp: unsupported configuration: {e}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except InvalidInputError as e:
        print(f"sopp: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    text = to_csv(SCHEMAS[args.command], rows)
    sys.stdout.write(text)
    out_dir = args.output_dir or os.environ.get(OUTPUT_DIR_ENV)
    if out_dir:
        d = Path(out_dir)
        stem = args.command.replace("-", "_")
        csv_path, man_path = d / f"{stem}.csv", d / f"{stem}.manifest.json"
        try:
            d.mkdir(parents=True, exist_ok=True)
            csv_path.write_text(text)
            man_path.write_text(json.dumps(manifest(args.command, cfg, [str(csv_path)]), indent=2, sort_keys=True) + "\n")
        except OSError as e:
            print(f"sopp: cannot write outputs: {e}", file=sys.stderr)
            return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
