#!/usr/bin/env python3
"""Run a recovery suite (default: suites/desk.json) and print per-entry
solution rates; optionally write results.csv / summary.json."""
import argparse
import time
from dataclasses import replace
from pathlib import Path

from lpgrow.bench import (load_suite, run_suite, solution_rate,
                          write_results_csv, write_summary_json)
from lpgrow.train import TrainConfig

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--suite", default=str(ROOT / "suites" / "desk.json"))
    ap.add_argument("--trials", type=int, default=None, help="override the suite trial count")
    ap.add_argument("--parallel", type=int, default=1, help="worker threads")
    ap.add_argument("--config", default=None, help="TrainConfig JSON path")
    ap.add_argument("--out-dir", default=None, help="write results.csv and summary.json here")
    ap.add_argument("--timings", action="store_true", help="record per-cell wall time")
    args = ap.parse_args()

    suite = load_suite(args.suite)
    if args.trials is not None:
        suite = replace(suite, trials=args.trials)
    config = (TrainConfig() if args.config is None
              else TrainConfig.from_json(Path(args.config).read_text(encoding="utf-8")))

    t0 = time.perf_counter()
    results, summary = run_suite(suite, config, parallel=args.parallel,
                                 record_timings=args.timings)
    elapsed = time.perf_counter() - t0

    print(f"{'entry':<20} {'rate':>7} {'cells':>6}  best equation (first recovered trial)")
    for entry in suite.entries:
        rows = [r for r in results if r.entry == entry.name]
        rate = solution_rate(rows)
        hit = next((r.equation for r in rows if r.recovered), rows[0].equation)
        print(f"{entry.name:<20} {rate:>6.1f}% {len(rows):>6}  {hit}")
    print(f"\noverall solution rate {summary['solution_rate']:.1f}% "
          f"({summary['cells']} cells, {summary['errors']} errors, {elapsed:.1f}s)")
    print(f"R2>0.99 accuracy {summary['r2_gt_099_accuracy']:.1f}% "
          f"(vs clean signal {summary['r2_clean_gt_099_accuracy']:.1f}%)")
    for label, rate in summary["complexity_bins"].items():
        print(f"  complexity {label:<10} {rate:.1f}%")

    if args.out_dir is not None:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_results_csv(results, out / "results.csv")
        write_summary_json(summary, out / "summary.json")
        print(f"wrote {out / 'results.csv'} and {out / 'summary.json'}")


if __name__ == "__main__":
    main()
