"""Command-line entry point.

Exit codes: 0 ok, 2 bad config or input, 3 enumeration capacity, 4 I/O.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import experiments as ex
from .bounds import bounds_for_plan, brute_force_success
from .config import read_flat
from .core import ChannelSet
from .errors import CapacityError, ConfigError, DomainError, TraceFormatError
from .scenario import (TrafficScenario, congestion_scenario, load_trace, platoon_scenario, save_trace,
                       synth_trace)

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_IO = 0, 2, 3, 4


def _common(p: argparse.ArgumentParser, config_required: bool = False) -> None:
    p.add_argument("--config", required=config_required, help="flat key = value config file")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", help="output directory (default $VDSA_OUT_DIR or ./out)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default $VDSA_WORKERS or 1)")
    p.add_argument("--paper-scale", action="store_true",
                   help="full-size runs, beta sets and sweep grid")
    p.add_argument("--verbose", "-v", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vdsa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="success bounds and Monte Carlo curves per strategy")
    _common(p)
    p = sub.add_parser("sweep", help="gamma sweep over random beta sets")
    _common(p)
    p = sub.add_parser("memory", help="memory-model comparison on a time-varying trace")
    _common(p)
    p.add_argument("--trace", help="trace CSV (default: synthetic congestion-episode trace)")
    p = sub.add_parser("platoon", help="paired uniform vs non-uniform platoon runs")
    _common(p)

    p = sub.add_parser("trace", help="generate or validate CBR traces")
    tsub = p.add_subparsers(dest="trace_command", required=True)
    q = tsub.add_parser("synth", help="write a synthetic trace CSV")
    _common(q)
    q.add_argument("--duration", type=float, default=140.0, help="seconds (default 140)")
    q.add_argument("--preset", choices=("platoon", "congestion"), default="platoon",
                   help="built-in scenario used when no --config is given")
    q = tsub.add_parser("validate", help="parse a trace CSV and report its shape")
    q.add_argument("path")
    q.add_argument("--verbose", "-v", action="store_true", help="debug logging")

    p = sub.add_parser("oracle", help="exact success probability for one cumulative allocation")
    _common(p)
    p.add_argument("--betas", help="comma-separated channel CBRs")
    p.add_argument("--plan", help="comma-separated cumulative samples per channel")
    return parser


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get("VDSA_OUT_DIR", "out"))


def _experiment(args, kind: str, default_id: str) -> ex.ExperimentConfig:
    values = read_flat(args.config) if args.config else {}
    values.setdefault("kind", kind)
    values.setdefault("experiment_id", default_id)
    if values["kind"] != kind:
        raise ConfigError(f"config kind {values['kind']!r} does not match command {kind!r}")
    if args.seed is not None:
        values.pop("seeds", None)
        values["seed"] = args.seed
    cfg = ex.ExperimentConfig.from_dict(values)
    return cfg.paper_scale() if args.paper_scale else cfg


def _workers(args) -> int:
    return args.workers if args.workers is not None else ex.default_workers()


def _report(result: ex.ExperimentResult, args) -> None:
    for path in ex.emit_report(result, _out_dir(args)):
        print(path)


def cmd_bounds(args) -> int:
    _report(ex.run_bounds_experiment(_experiment(args, "bounds", "bounds")), args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    _report(ex.run_gamma_sweep(_experiment(args, "sweep", "sweep"), _workers(args)), args)
    return EXIT_OK


def cmd_memory(args) -> int:
    cfg = _experiment(args, "memory", "memory")
    path = args.trace or cfg.trace
    trace = load_trace(path) if path else ex.default_memory_trace(cfg)
    _report(ex.run_memory_experiment(trace, cfg, _workers(args)), args)
    return EXIT_OK


def _scenario(cfg: ex.ExperimentConfig) -> TrafficScenario:
    if cfg.scenario:
        return TrafficScenario.from_file(cfg.scenario)
    return platoon_scenario(cfg.platoon_size)


def cmd_platoon(args) -> int:
    cfg = _experiment(args, "platoon", "platoon")
    _report(ex.run_platoon_experiment(cfg, _scenario(cfg), _workers(args)), args)
    return EXIT_OK


def cmd_trace_synth(args) -> int:
    if args.config:
        scenario = TrafficScenario.from_file(args.config)
    elif args.preset == "congestion":
        scenario = congestion_scenario()
    else:
        scenario = platoon_scenario()
    seed = args.seed if args.seed is not None else 0
    trace = synth_trace(scenario, args.duration, seed)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    print(save_trace(trace, out / f"trace_seed{seed}.csv"))
    return EXIT_OK


def cmd_trace_validate(args) -> int:
    trace = load_trace(args.path)
    print(json.dumps({"path": args.path, "steps": int(trace.times.size),
                      "channels": trace.n_channels, "dt": trace.dt,
                      "mean_cbr": [round(float(x), 6) for x in trace.cbr.mean(axis=0)]}))
    return EXIT_OK


def cmd_oracle(args) -> int:
    values = read_flat(args.config) if args.config else {}
    betas = _floats(args.betas) if args.betas else values.get("betas")
    plan = _floats(args.plan) if args.plan else values.get("plan")
    if betas is None or plan is None:
        raise ConfigError("oracle needs betas and plan (flags or config keys)")
    if any(float(n) != int(n) for n in plan):
        raise ConfigError("plan entries must be integers")
    plan = [int(n) for n in plan]
    channels = ChannelSet(tuple(float(b) for b in betas))
    exact = brute_force_success(channels, plan)
    b = bounds_for_plan(channels, plan)
    print(json.dumps({"betas": list(channels.betas), "plan": plan, "success": exact,
                      "lower": b.lower, "upper": b.upper}))
    return EXIT_OK


COMMANDS = {"bounds": cmd_bounds, "sweep": cmd_sweep, "memory": cmd_memory,
            "platoon": cmd_platoon, "oracle": cmd_oracle}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "trace":
        handler = cmd_trace_synth if args.trace_command == "synth" else cmd_trace_validate
    else:
        handler = COMMANDS[args.command]
    try:
        return handler(args)
    except CapacityError as exc:
        where = f" (config index {exc.index})" if exc.index is not None else ""
        print(f"vdsa: capacity exceeded{where}: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ConfigError, DomainError, TraceFormatError) as exc:
        print(f"vdsa: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"vdsa: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
