"""Iterations-to-threshold ratio of heuristic to equal allocation over random beta sets."""
import argparse
from pathlib import Path

from vdsa.experiments import ExperimentConfig, default_workers, emit_report, run_gamma_sweep

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out")
    ap.add_argument("--workers", type=int, default=default_workers())
    ap.add_argument("--paper-scale", action="store_true")
    args = ap.parse_args()
    cfg = ExperimentConfig.from_file(ROOT / "configs" / "sweep.cfg")
    if args.paper_scale:
        cfg = cfg.paper_scale()
    res = run_gamma_sweep(cfg, workers=args.workers)
    emit_report(res, args.out)
    for g, s in res.summary.items():
        print(f"gamma {g:>4}: median ratio {s['median']:.3f}, "
              f"worse than equal in {100 * s['frac_worse']:.1f}% of {s['n']}")


if __name__ == "__main__":
    main()
