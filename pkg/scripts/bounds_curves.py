"""Bound and Monte Carlo curves for N=8 and N=6, with threshold crossings."""
import argparse
from pathlib import Path

from vdsa.experiments import ExperimentConfig, emit_report, run_bounds_experiment
from vdsa.montecarlo import first_crossing

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out")
    ap.add_argument("--threshold", type=float, default=0.9)
    args = ap.parse_args()
    for name in ("bounds_n8", "bounds_n6"):
        res = run_bounds_experiment(ExperimentConfig.from_file(ROOT / "configs" / f"{name}.cfg"))
        emit_report(res, args.out)
        print(f"{name} (N={res.config.n_budget})")
        for curve, values in res.summary["curves"].items():
            x = first_crossing(values, args.threshold)
            print(f"  {curve:<22} {'never' if x is None else f'{x:.2f}'}")


if __name__ == "__main__":
    main()
