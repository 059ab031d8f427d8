"""Paired uniform / non-uniform platoon runs on the motorway trace."""
import argparse
from pathlib import Path

import numpy as np

from vdsa.experiments import ExperimentConfig, default_workers, emit_report, run_platoon_experiment

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out")
    ap.add_argument("--runs", type=int)
    ap.add_argument("--workers", type=int, default=default_workers())
    args = ap.parse_args()
    cfg = ExperimentConfig.from_file(ROOT / "configs" / "platoon.cfg")
    if args.runs:
        cfg = ExperimentConfig(**{**cfg.__dict__, "runs": args.runs})
    res = run_platoon_experiment(cfg, workers=args.workers)
    emit_report(res, args.out)
    for g, runs in res.summary.items():
        match = np.mean([r["match"] for r in runs])
        sw = np.mean([r["switches_60"] for r in runs])
        last = np.mean([r["success"][-1] for r in runs])
        print(f"gamma {g:>3}: best-channel match {match:.3f}, switches <60 s {sw:.1f}, "
              f"last follower {last:.4f}")


if __name__ == "__main__":
    main()
