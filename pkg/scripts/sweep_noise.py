#!/usr/bin/env python3
"""Sweep target-noise fractions over a recovery suite and report how the
solution rate and R2 accuracies degrade."""
import argparse
import time
from dataclasses import replace
from pathlib import Path

from lpgrow.bench import load_suite, run_suite, write_results_csv, write_summary_json
from lpgrow.train import TrainConfig

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--suite", default=str(ROOT / "suites" / "desk.json"))
    ap.add_argument("--noise", type=float, nargs="+", default=[0.0, 0.001, 0.01, 0.1],
                    help="noise fractions to cross with the suite")
    ap.add_argument("--trials", type=int, default=None, help="override the suite trial count")
    ap.add_argument("--parallel", type=int, default=1, help="worker threads")
    ap.add_argument("--out-dir", default=None, help="write results.csv and summary.json here")
    args = ap.parse_args()

    suite = replace(load_suite(args.suite), noise_fractions=tuple(args.noise))
    if args.trials is not None:
        suite = replace(suite, trials=args.trials)

    t0 = time.perf_counter()
    results, summary = run_suite(suite, TrainConfig(), parallel=args.parallel)
    elapsed = time.perf_counter() - t0

    print(f"{'noise':>8} {'cells':>6} {'rate':>7} {'R2>0.99':>8} {'clean R2>0.99':>14}")
    for row in summary["by_setting"]:
        print(f"{row['noise']:>8g} {row['cells']:>6} {row['solution_rate']:>6.1f}% "
              f"{row['r2_gt_099_accuracy']:>7.1f}% {row['r2_clean_gt_099_accuracy']:>13.1f}%")
    print(f"\n{summary['cells']} cells in {elapsed:.1f}s "
          f"({summary['errors']} errors)")

    if args.out_dir is not None:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_results_csv(results, out / "results.csv")
        write_summary_json(summary, out / "summary.json")
        print(f"wrote {out / 'results.csv'} and {out / 'summary.json'}")


if __name__ == "__main__":
    main()
