"""Best-channel selection rate for each memory model on the congestion trace."""
import argparse
from pathlib import Path

from vdsa.experiments import (ExperimentConfig, default_memory_trace, default_workers,
                              emit_report, run_memory_experiment)
from vdsa.scenario import load_trace

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out")
    ap.add_argument("--trace", help="CSV trace instead of the synthetic one")
    ap.add_argument("--workers", type=int, default=default_workers())
    args = ap.parse_args()
    cfg = ExperimentConfig.from_file(ROOT / "configs" / "memory.cfg")
    trace = load_trace(args.trace) if args.trace else default_memory_trace(cfg)
    res = run_memory_experiment(trace, cfg, workers=args.workers)
    emit_report(res, args.out)
    for label, s in sorted(res.summary.items(), key=lambda kv: -kv[1]["mean"]):
        print(f"{label:<16} {s['mean']:.4f} +- {s['sem']:.4f}   gain {s['gain_pp']:+.2f} pp")


if __name__ == "__main__":
    main()
