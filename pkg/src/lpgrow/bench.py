"""Benchmark harness: multi-trial recovery suites over noise and
irrelevant-input sweeps, with exact-recovery scoring and CSV/JSON reports.

A suite is a JSON document listing ground-truth equations with per-variable
sampling ranges. The harness expands it into (entry x trial x noise x
irrelevant) cells; each cell samples a fresh dataset, fits on a 75/25
split, and scores exact recovery plus test-set accuracy. All cell seeds
derive from the suite master seed, so reruns are byte-identical.
"""
from __future__ import annotations

import csv
import json
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import SamplingSpec, generate, split
from .ensemble import SecondaryAdapter, run_ensemble, snap_integer_exponents
from .poly import complexity, equals_exact, evaluate_many, parse_equation, print_equation
from .train import TrainConfig, fit

__all__ = [
    "SuiteEntry",
    "SuiteSpec",
    "TrialResult",
    "RESULT_COLUMNS",
    "r_squared",
    "solution_rate",
    "complexity_binning",
    "run_suite",
    "summarize",
    "load_suite",
    "save_suite",
    "write_results_csv",
    "write_summary_json",
]

TRAIN_FRACTION = 0.75
DEFAULT_BIN_EDGES = (0.0, 3.0, 6.0, 9.0, 12.0, 15.0, math.inf)
RESULT_COLUMNS = ("entry", "trial", "noise", "irrelevant", "recovered", "r2_test",
                  "r2_clean", "mse_test", "complexity", "blocks", "wall_ms", "equation")
_AGGREGATIONS = ("overall", "min", "median", "mean", "max")


@dataclass(frozen=True)
class SuiteEntry:
    """One benchmark target: a ground-truth equation with sampling ranges."""

    name: str
    equation: str
    ranges: tuple[tuple[float, float], ...]
    n_points: int = 10000

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("entry name must be nonempty")
        ranges = tuple((float(lo), float(hi)) for lo, hi in self.ranges)
        object.__setattr__(self, "ranges", ranges)
        for lo, hi in ranges:
            if not (0.0 < lo < hi):
                raise ValueError(f"entry {self.name}: ranges must satisfy 0 < low < high")
        if self.n_points < 2:
            raise ValueError(f"entry {self.name}: n_points must be >= 2")
        gt = parse_equation(self.equation, len(ranges))
        for term in gt.terms:
            for e in term.exponents:
                if e != round(e):
                    raise ValueError(
                        f"entry {self.name}: ground truth has non-integer exponent {e}"
                    )

    def ground_truth(self, nvars: int | None = None):
        return parse_equation(self.equation, nvars if nvars is not None else len(self.ranges))


@dataclass(frozen=True)
class SuiteSpec:
    """A whole benchmark run: entries crossed with trial/noise/irrelevant
    sweeps, all seeded from one master seed."""

    entries: tuple[SuiteEntry, ...]
    trials: int = 5
    noise_fractions: tuple[float, ...] = (0.0,)
    irrelevant_counts: tuple[int, ...] = (0,)
    master_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "noise_fractions",
                           tuple(float(v) for v in self.noise_fractions))
        object.__setattr__(self, "irrelevant_counts",
                           tuple(int(v) for v in self.irrelevant_counts))
        if not self.entries:
            raise ValueError("suite must contain at least one entry")
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("entry names must be unique")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.noise_fractions or any(v < 0.0 for v in self.noise_fractions):
            raise ValueError("noise_fractions must be nonempty and nonnegative")
        if not self.irrelevant_counts or any(v < 0 for v in self.irrelevant_counts):
            raise ValueError("irrelevant_counts must be nonempty and nonnegative")
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")


@dataclass(frozen=True)
class TrialResult:
    """One benchmark cell: scoring of a single fitted model."""

    entry: str
    trial: int
    noise: float
    irrelevant: int
    recovered: bool
    r2_test: float
    r2_clean: float
    mse_test: float
    complexity: int
    blocks: int
    wall_ms: float
    equation: str
    lp_verdict: bool
    gt_complexity: int
    error: str | None = None

    def __post_init__(self) -> None:
        # exact recovery is only defined against LP ground truths
        if self.recovered and not self.lp_verdict:
            raise ValueError("recovered requires lp_verdict")


def suite_from_dict(doc: dict) -> SuiteSpec:
    allowed = {"entries", "trials", "noise_fractions", "irrelevant_counts", "master_seed"}
    unknown = set(doc) - allowed
    if unknown:
        raise ValueError(f"unknown suite keys: {sorted(unknown)}")
    if "entries" not in doc:
        raise ValueError("suite is missing 'entries'")
    entry_keys = {"name", "equation", "ranges", "n_points"}
    entries = []
    for row in doc["entries"]:
        bad = set(row) - entry_keys
        if bad:
            raise ValueError(f"unknown entry keys: {sorted(bad)}")
        entries.append(SuiteEntry(
            name=row["name"],
            equation=row["equation"],
            ranges=tuple((float(lo), float(hi)) for lo, hi in row["ranges"]),
            n_points=int(row.get("n_points", 10000)),
        ))
    return SuiteSpec(
        entries=tuple(entries),
        trials=int(doc.get("trials", 5)),
        noise_fractions=tuple(doc.get("noise_fractions", [0.0])),
        irrelevant_counts=tuple(doc.get("irrelevant_counts", [0])),
        master_seed=int(doc.get("master_seed", 0)),
    )


def suite_to_dict(suite: SuiteSpec) -> dict:
    return {
        "entries": [
            {"name": e.name, "equation": e.equation,
             "ranges": [list(r) for r in e.ranges], "n_points": e.n_points}
            for e in suite.entries
        ],
        "trials": suite.trials,
        "noise_fractions": list(suite.noise_fractions),
        "irrelevant_counts": list(suite.irrelevant_counts),
        "master_seed": suite.master_seed,
    }


def load_suite(path) -> SuiteSpec:
    text = Path(path).read_text(encoding="utf-8")
    return suite_from_dict(json.loads(text))


def save_suite(suite: SuiteSpec, path) -> None:
    Path(path).write_text(json.dumps(suite_to_dict(suite), indent=2) + "\n", encoding="utf-8")


def r_squared(y_true, y_pred) -> float:
    """Coefficient of determination, 1 - SS_res / SS_tot."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1 or y_true.size == 0:
        raise ValueError("y_true and y_pred must be equal-length nonempty vectors")
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("r_squared is undefined for constant targets")
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    return 1.0 - ss_res / ss_tot


def solution_rate(results, aggregation: str = "overall") -> float:
    """Percentage of recovered cells. "overall" pools every cell; the other
    aggregations compute one rate per trial index and then reduce across
    trials (min / median / mean / max)."""
    results = list(results)
    if not results:
        raise ValueError("solution_rate needs at least one result")
    if aggregation == "overall":
        return 100.0 * sum(1 for r in results if r.recovered) / len(results)
    if aggregation not in _AGGREGATIONS:
        raise ValueError(f"aggregation must be one of {_AGGREGATIONS}")
    by_trial: dict[int, list[bool]] = {}
    for r in results:
        by_trial.setdefault(r.trial, []).append(r.recovered)
    rates = [100.0 * sum(flags) / len(flags) for _, flags in sorted(by_trial.items())]
    reducer = {"min": min, "max": max,
               "median": statistics.median, "mean": statistics.fmean}[aggregation]
    return float(reducer(rates))


def complexity_binning(results, bin_edges=DEFAULT_BIN_EDGES) -> dict[str, float]:
    """Mean solution rate per ground-truth complexity bin (lo, hi].
    Bins with no members are omitted."""
    edges = tuple(float(v) for v in bin_edges)
    if len(edges) < 2 or any(a >= b for a, b in zip(edges, edges[1:])):
        raise ValueError("bin_edges must be strictly increasing with >= 2 values")
    bins: dict[tuple[float, float], list[bool]] = {}
    for r in results:
        for lo, hi in zip(edges, edges[1:]):
            if lo < r.gt_complexity <= hi:
                bins.setdefault((lo, hi), []).append(r.recovered)
                break
    return {f"({format(lo, 'g')}, {format(hi, 'g')}]":
                100.0 * sum(flags) / len(flags)
            for (lo, hi), flags in sorted(bins.items())}


def _cell_seeds(master_seed: int, ei: int, ti: int, ni: int, ii: int) -> tuple[int, int, int]:
    state = np.random.SeedSequence([master_seed, ei, ti, ni, ii]).generate_state(3)
    return int(state[0]), int(state[1]), int(state[2])


def _run_cell(suite: SuiteSpec, config: TrainConfig,
              adapter: SecondaryAdapter | None, record_timings: bool,
              ei: int, ti: int, ni: int, ii: int) -> TrialResult:
    entry = suite.entries[ei]
    noise = suite.noise_fractions[ni]
    irr = suite.irrelevant_counts[ii]
    gt_cx = complexity(entry.ground_truth()).total
    try:
        data_seed, split_seed, fit_seed = _cell_seeds(suite.master_seed, ei, ti, ni, ii)
        spec = SamplingSpec(ranges=entry.ranges, n_points=entry.n_points,
                            noise_fraction=noise, irrelevant_inputs=irr, seed=data_seed)
        ds = generate(entry.ground_truth(), spec)
        train_ds, test_ds = split(ds, TRAIN_FRACTION, seed=split_seed)
        cfg = replace(config, master_seed=fit_seed)
        if adapter is None:
            report = fit(train_ds, cfg, record_timings=record_timings)
            is_lp = report.lp_verdict
            final_eq = (snap_integer_exponents(report.best.equation, cfg.integer_snap_tol)
                        if is_lp else report.best.equation)
            eq_str = print_equation(final_eq)
        else:
            ens = run_ensemble(train_ds, cfg, adapter, record_timings=record_timings)
            report = ens.fit_report
            is_lp = ens.verdict.is_lp and report.error is None
            final_eq = (snap_integer_exponents(report.best.equation, cfg.integer_snap_tol)
                        if is_lp else report.best.equation)
            eq_str = ens.final_equation if ens.final_equation is not None else print_equation(final_eq)
        gt_full = entry.ground_truth(nvars=ds.n_inputs)
        recovered = bool(is_lp and equals_exact(final_eq, gt_full, cfg.coeff_rtol))
        preds = evaluate_many(final_eq, test_ds.inputs)
        r2_test = r_squared(test_ds.targets, preds)
        mse_test = float(np.mean((preds - test_ds.targets) ** 2))
        if ds.provenance is not None:
            clean = evaluate_many(parse_equation(ds.provenance.equation, ds.n_inputs),
                                  test_ds.inputs)
            r2_clean = r_squared(clean, preds)
        else:
            r2_clean = math.nan
        return TrialResult(
            entry=entry.name, trial=ti, noise=noise, irrelevant=irr,
            recovered=recovered, r2_test=r2_test, r2_clean=r2_clean,
            mse_test=mse_test, complexity=complexity(final_eq).total,
            blocks=report.best.blocks_used, wall_ms=report.wall_time * 1000.0,
            equation=eq_str, lp_verdict=bool(is_lp), gt_complexity=gt_cx,
            error=report.error,
        )
    except Exception as exc:  # cell failures must not kill the suite
        return TrialResult(
            entry=entry.name, trial=ti, noise=noise, irrelevant=irr,
            recovered=False, r2_test=math.nan, r2_clean=math.nan,
            mse_test=math.nan, complexity=0, blocks=0, wall_ms=0.0,
            equation="", lp_verdict=False, gt_complexity=gt_cx,
            error=f"{type(exc).__name__}: {exc}",
        )


def run_suite(suite: SuiteSpec, config: TrainConfig | None = None,
              adapter: SecondaryAdapter | None = None, parallel: int = 1,
              record_timings: bool = False) -> tuple[list[TrialResult], dict]:
    """Execute every suite cell and return (results, summary). Cells are
    independent; parallel > 1 runs them on a thread pool (the training
    kernel releases the GIL). Result order is canonical regardless of
    execution order."""
    if config is None:
        config = TrainConfig()
    if parallel < 1:
        raise ValueError("parallel must be >= 1")
    cells = [(ei, ti, ni, ii)
             for ei in range(len(suite.entries))
             for ti in range(suite.trials)
             for ni in range(len(suite.noise_fractions))
             for ii in range(len(suite.irrelevant_counts))]
    if parallel == 1:
        results = [_run_cell(suite, config, adapter, record_timings, *cell)
                   for cell in cells]
    else:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(
                lambda cell: _run_cell(suite, config, adapter, record_timings, *cell),
                cells))
    order = {e.name: i for i, e in enumerate(suite.entries)}
    results.sort(key=lambda r: (order[r.entry], r.trial, r.noise, r.irrelevant))
    return results, summarize(suite, results)


def summarize(suite: SuiteSpec, results) -> dict:
    """Aggregate rows into the summary document written next to the CSV."""
    results = list(results)
    by_setting = []
    for noise in suite.noise_fractions:
        for irr in suite.irrelevant_counts:
            cell = [r for r in results if r.noise == noise and r.irrelevant == irr]
            if not cell:
                continue
            by_setting.append({
                "noise": noise,
                "irrelevant": irr,
                "cells": len(cell),
                "solution_rate": solution_rate(cell),
                "r2_gt_099_accuracy":
                    100.0 * sum(1 for r in cell if r.r2_test > 0.99) / len(cell),
                "r2_clean_gt_099_accuracy":
                    100.0 * sum(1 for r in cell if r.r2_clean > 0.99) / len(cell),
            })
    return {
        "cells": len(results),
        "entries": len(suite.entries),
        "trials": suite.trials,
        "solution_rate": solution_rate(results),
        "r2_gt_099_accuracy":
            100.0 * sum(1 for r in results if r.r2_test > 0.99) / len(results),
        "r2_clean_gt_099_accuracy":
            100.0 * sum(1 for r in results if r.r2_clean > 0.99) / len(results),
        "solution_rate_by_trial": {
            agg: solution_rate(results, agg) for agg in ("min", "median", "mean", "max")
        },
        "by_setting": by_setting,
        "complexity_bins": complexity_binning(results),
        "errors": sum(1 for r in results if r.error is not None),
    }


def write_results_csv(results, path) -> None:
    """One row per cell in the stable column order; floats rendered via
    repr so rereads reproduce the exact values."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for r in results:
            writer.writerow([
                r.entry, r.trial, repr(float(r.noise)), r.irrelevant,
                "true" if r.recovered else "false",
                repr(float(r.r2_test)), repr(float(r.r2_clean)),
                repr(float(r.mse_test)), r.complexity, r.blocks,
                repr(float(r.wall_ms)), r.equation,
            ])


def write_summary_json(summary: dict, path) -> None:
    Path(path).write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
