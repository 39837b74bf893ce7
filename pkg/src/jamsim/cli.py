"""Command-line entry point: ``jamsim {run,compare-routing,compare-policy,oracle}``."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import yaml

from . import harness, oracles
from .config import PROFILES, ExperimentConfig, load_config
from .errors import ConfigurationError, JamsimError, OutputError

ERROR_NAMES = {1: "simulation", 2: "configuration", 3: "geometry", 4: "insufficient-data", 5: "output"}


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        out[key.strip()] = yaml.safe_load(raw)
    return out


def build_config(args) -> ExperimentConfig:
    overrides = _parse_set(args.set)
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.reps is not None:
        overrides["repetitions"] = args.reps
    if args.slots is not None:
        overrides["horizon"] = args.slots
    if args.protocol is not None:
        overrides["routing.protocol"] = args.protocol.replace("-", "_")
    if args.learner is not None:
        kind = args.learner.replace("-", "_")
        if kind == "fixed":
            overrides["policy.kind"] = "fixed"
        else:
            overrides["policy.kind"] = "learner"
            overrides["policy.learner"] = kind
    cfg = load_config(args.config, args.profile, overrides)
    # surface bad protocol names as configuration errors
    from .routing import Protocol
    Protocol.parse(cfg.routing.protocol)
    return cfg


def _summary(series) -> dict:
    h = series[0].horizon
    return {
        "repetitions": len(series),
        "final_throughput": float(sum(s.throughput[-1] for s in series) / len(series)),
        "overall": harness.summarize(series, (0, h)),
    }


def cmd_run(args) -> dict:
    cfg = build_config(args)
    series = harness.run_experiment(cfg, label="run", workers=args.workers)
    harness.emit_results(series, args.out, cfg, level=args.level)
    return _summary(series)


def cmd_compare_routing(args) -> dict:
    cfg = build_config(args)
    out = Path(args.out)
    result = {}
    for proto, series in harness.compare_routing(cfg, workers=args.workers).items():
        c = cfg.with_overrides(**{"routing.protocol": proto})
        harness.emit_results(series, out / proto, c, level=args.level)
        a = cfg.red.activation_slot
        result[proto] = {
            **_summary(series),
            "before_activation": harness.summarize(series, (0, min(a, cfg.horizon))) if a > 0 else None,
            "after_activation": harness.summarize(series, (a, cfg.horizon)) if a < cfg.horizon else None,
        }
    return result


def cmd_compare_policy(args) -> dict:
    cfg = build_config(args)
    out = Path(args.out)
    result = {}
    for name, c in harness.policy_configs(cfg).items():
        series = harness.run_experiment(c, label=name, workers=args.workers)
        harness.emit_results(series, out / name, c, level=args.level)
        result[name] = _summary(series)
    return result


def cmd_oracle(args) -> dict:
    return oracles.run_all(seed=args.seed or 0, n_instances=args.instances)


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jamsim", description="Jamming-aware routing and learning simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML or JSON configuration file")
        sp.add_argument("--profile", choices=sorted(PROFILES), help="preset overrides applied first")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted override, repeatable")
        sp.add_argument("--seed", type=int, help="base seed; repetition k uses seed+k")
        sp.add_argument("--reps", type=int, help="number of repetitions")
        sp.add_argument("--slots", type=int, help="horizon in slots")
        sp.add_argument("--protocol", help="min_distance | jamming_avoiding | jamming_aware")
        sp.add_argument("--learner", help="fixed | actor_critic | tabular")
        sp.add_argument("--out", default="results", help="output directory")
        sp.add_argument("--workers", type=int, default=1, help="parallel repetitions")
        sp.add_argument("--level", type=float, default=0.99, help="confidence level of the bands")

    for name, fn, text in [("run", cmd_run, "one configuration"),
                           ("compare-routing", cmd_compare_routing, "all routing protocols on shared seeds"),
                           ("compare-policy", cmd_compare_policy, "learners against the fixed-role baseline")]:
        sp = sub.add_parser(name, help=text)
        common(sp)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("oracle", help="cross-check fast code paths against reference oracles")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--instances", type=int, default=200)
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        result = args.func(args)
    except JamsimError as exc:
        print(f"error [{ERROR_NAMES.get(exc.category, 'error')}]: {exc}", file=sys.stderr)
        return exc.category
    except OSError as exc:
        print(f"error [output]: {exc}", file=sys.stderr)
        return OutputError.category
    result = {"command": args.command, "elapsed_s": round(time.perf_counter() - t0, 3), "result": result}
    print(json.dumps(result, indent=2, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
