"""Command-line front end.

Subcommands: fit, generate, benchmark, classify, ensemble, searchspace.
Exit codes: 0 success, 1 usage error, 2 input/data error, 3 training
abort, 4 secondary-adapter failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from .bench import load_suite, run_suite, write_results_csv, write_summary_json
from .data import SamplingSpec, generate, load_csv, save_csv
from .ensemble import SecondaryAdapter, run_ensemble, snap_integer_exponents
from .poly import parse_equation, print_equation, search_space
from .train import TrainConfig, fit

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_TRAINING = 3
EXIT_SECONDARY = 4


class _ArgumentParser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; the published contract
    reserves 2 for input/data problems, so remap to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_config(path: str | None, seed: int | None = None) -> TrainConfig:
    if path is None:
        config = TrainConfig()
    else:
        config = TrainConfig.from_json(Path(path).read_text(encoding="utf-8"))
    if seed is not None:
        config = replace(config, master_seed=seed)
    return config


def _json_number(v: float):
    v = float(v)
    return v if math.isfinite(v) else None


def _presented(report, config: TrainConfig) -> str:
    eq = report.best.equation
    if report.lp_verdict:
        eq = snap_integer_exponents(eq, config.integer_snap_tol)
    return print_equation(eq)


def _report_doc(report, config: TrainConfig) -> dict:
    best = report.best
    return {
        "best": {
            "equation": _presented(report, config),
            "mse": _json_number(best.mse),
            "complexity": best.complexity.total,
            "se": _json_number(best.symbolic_error),
            "blocks": best.blocks_used,
        },
        "candidates": [
            {
                "equation": print_equation(c.equation),
                "mse": _json_number(c.mse),
                "complexity": c.complexity.total,
                "se": _json_number(c.symbolic_error),
                "blocks": c.blocks_used,
                "instance": c.instance_id,
            }
            for c in report.all_candidates
        ],
        "lp_verdict": report.lp_verdict,
        "config": json.loads(config.to_json()),
        "wall_ms": report.wall_time * 1000.0,
    }


def _parse_ranges(spec: str) -> tuple[tuple[float, float], ...]:
    """Parse a "lo:hi,lo:hi,..." per-variable range list."""
    ranges = []
    for chunk in spec.split(","):
        parts = chunk.split(":")
        if len(parts) != 2:
            raise ValueError(f"bad range {chunk!r}, expected low:high")
        ranges.append((float(parts[0]), float(parts[1])))
    return tuple(ranges)


def cmd_fit(args) -> int:
    try:
        dataset = load_csv(args.data, target_name=args.target)
        config = _load_config(args.config, args.seed)
    except (OSError, ValueError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    report = fit(dataset, config)
    if report.error is not None:
        return _fail(report.error, EXIT_TRAINING)
    Path(args.out).write_text(
        json.dumps(_report_doc(report, config), indent=2) + "\n", encoding="utf-8")
    print(_presented(report, config))
    print("LP" if report.lp_verdict else "NON_LP")
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        ranges = _parse_ranges(args.ranges)
        gt = parse_equation(args.equation, len(ranges))
        spec = SamplingSpec(ranges=ranges, n_points=args.n,
                            noise_fraction=args.noise,
                            irrelevant_inputs=args.irrelevant, seed=args.seed)
        dataset = generate(gt, spec)
        save_csv(dataset, args.out)
    except (OSError, ValueError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    try:
        suite = load_suite(args.suite)
        if args.trials is not None:
            suite = replace(suite, trials=args.trials)
    except (OSError, ValueError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    results, summary = run_suite(suite, parallel=args.parallel or 1)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_results_csv(results, out_dir / "results.csv")
    write_summary_json(summary, out_dir / "summary.json")
    print(f"cells={summary['cells']} solution_rate={summary['solution_rate']:.1f}% "
          f"r2_gt_099={summary['r2_gt_099_accuracy']:.1f}% errors={summary['errors']}")
    for row in summary["by_setting"]:
        print(f"  noise={row['noise']} irrelevant={row['irrelevant']} "
              f"solution_rate={row['solution_rate']:.1f}% "
              f"r2_gt_099={row['r2_gt_099_accuracy']:.1f}%")
    return EXIT_OK


def cmd_classify(args) -> int:
    try:
        dataset = load_csv(args.data)
        config = _load_config(args.config)
    except (OSError, ValueError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    report = fit(dataset, config)
    if report.error is not None:
        return _fail(report.error, EXIT_TRAINING)
    label = "LP" if report.lp_verdict else "NON_LP"
    print(f"{label} {_presented(report, config)}")
    return EXIT_OK


def cmd_ensemble(args) -> int:
    try:
        dataset = load_csv(args.data)
        adapter = None
        if args.secondary_cmd is not None:
            adapter = SecondaryAdapter(args.secondary_cmd, timeout=args.timeout)
    except (OSError, ValueError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    report = run_ensemble(dataset, TrainConfig(), adapter)
    if report.source in ("primary", "secondary"):
        print(report.final_equation)
        print(f"path {report.source}")
        return EXIT_OK
    # non-LP with no (or failed) fallback: show the fitted intermediate
    print(f"NON_LP {report.primary_equation}")
    print(f"path {report.source}")
    if report.fit_report.error is not None and report.secondary is None:
        print(f"error: {report.fit_report.error}", file=sys.stderr)
        return EXIT_TRAINING
    if report.secondary is not None and report.secondary.error is not None:
        print(f"error: {report.secondary.error}", file=sys.stderr)
    return EXIT_SECONDARY


def cmd_searchspace(args) -> int:
    try:
        result = search_space(args.order, args.vars)
    except ValueError as exc:
        return _fail(str(exc), EXIT_INPUT)
    print(f"T={result.term_count} S={result.structure_count}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="lpgrow",
                             description="Grow sparse power-term networks that "
                                         "recover Laurent polynomial equations from data.")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_ArgumentParser)

    p = sub.add_parser("fit", help="fit a dataset and write a report JSON")
    p.add_argument("--data", required=True, help="input CSV path")
    p.add_argument("--target", default="y", help="target column name (default y)")
    p.add_argument("--config", default=None, help="TrainConfig JSON path")
    p.add_argument("--out", required=True, help="report JSON output path")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("generate", help="sample a synthetic dataset CSV")
    p.add_argument("--equation", required=True, help="ground-truth equation string")
    p.add_argument("--ranges", required=True, help="per-variable low:high list, comma separated")
    p.add_argument("--n", type=int, default=10000, help="number of rows (default 10000)")
    p.add_argument("--noise", type=float, default=0.0, help="noise fraction (default 0)")
    p.add_argument("--irrelevant", type=int, default=0, help="irrelevant input count (default 0)")
    p.add_argument("--seed", type=int, required=True, help="sampling seed")
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("benchmark", help="run a benchmark suite")
    p.add_argument("--suite", required=True, help="suite JSON path")
    p.add_argument("--trials", type=int, default=None,
                   help="override the suite's trial count (default: suite value)")
    p.add_argument("--out-dir", required=True, help="directory for results.csv and summary.json")
    p.add_argument("--parallel", type=int, default=None, help="worker threads (default 1)")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("classify", help="fit and report the LP verdict")
    p.add_argument("--data", required=True, help="input CSV path")
    p.add_argument("--config", default=None, help="TrainConfig JSON path")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("ensemble", help="fit, then fall back to a secondary solver if non-LP")
    p.add_argument("--data", required=True, help="input CSV path")
    p.add_argument("--secondary-cmd", default=None,
                   help="shell command template with {input} for the dataset CSV path")
    p.add_argument("--timeout", type=float, default=600.0,
                   help="secondary solver timeout in seconds (default 600)")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("searchspace", help="count candidate terms and structures")
    p.add_argument("--order", type=int, required=True, help="maximum total degree")
    p.add_argument("--vars", type=int, required=True, help="number of variables")
    p.set_defaults(func=cmd_searchspace)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
