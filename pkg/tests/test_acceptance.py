"""Acceptance gate: ten end-to-end checks covering gradient correctness,
extraction fidelity, recovery benchmarks, classification soundness, noise
and irrelevant-input robustness, search-space counting, model selection,
and byte-level determinism. Each check prints one pass/fail line."""
import json
import math
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from lpgrow.bench import load_suite, run_suite, solution_rate
from lpgrow.data import Dataset, SamplingSpec, generate
from lpgrow.ensemble import classify_lp, snap_integer_exponents
from lpgrow.network import NetworkParams, backward, extract_equation, forward_many
from lpgrow.poly import complexity, equals_exact, evaluate_many, parse_equation, search_space
from lpgrow.train import EquationCandidate, TrainConfig, fit, selection_key

ROOT = Path(__file__).resolve().parent.parent
DESK_SUITE = ROOT / "suites" / "desk.json"


def _verdict(num: int, ok: bool, detail: str) -> None:
    print(f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'}: {detail}")


def _random_params(rng, nvars: int, blocks: int) -> NetworkParams:
    # magnitudes stay >= 0.05 so finite differences never straddle the
    # L1 kink at zero; the range still lies inside [-3, 3]
    def draw(shape):
        return rng.uniform(0.05, 3.0, shape) * rng.choice([-1.0, 1.0], shape)

    W = draw((blocks, nvars))
    c = draw(blocks)
    bias = float(draw(()))
    return NetworkParams.from_arrays(W, c, bias)


def _fd_loss_gradient(params, batch, l1, l2, h=1e-6):
    W = params.weight_matrix()
    c = np.asarray(params.output_weights)
    bias = params.output_bias

    def loss_at(Wp, cp, bp):
        return backward(NetworkParams.from_arrays(Wp, cp, bp), batch, l1, l2)[0]

    gW = np.zeros_like(W)
    for idx in np.ndindex(*W.shape):
        d = np.zeros_like(W)
        d[idx] = h
        gW[idx] = (loss_at(W + d, c, bias) - loss_at(W - d, c, bias)) / (2 * h)
    gc = np.zeros_like(c)
    for i in range(c.size):
        d = np.zeros_like(c)
        d[i] = h
        gc[i] = (loss_at(W, c + d, bias) - loss_at(W, c - d, bias)) / (2 * h)
    gb = (loss_at(W, c, bias + h) - loss_at(W, c, bias - h)) / (2 * h)
    return gW, gc, gb


def test_criterion_01_gradient_oracle():
    rng = np.random.default_rng(12345)
    penalties = [(0.0, 0.0), (1e-4, 1e-4), (1e-2, 1e-3)]
    start = time.perf_counter()
    worst = 0.0
    for trial in range(100):
        nvars = int(rng.integers(1, 5))
        blocks = int(rng.integers(1, 5))
        params = _random_params(rng, nvars, blocks)
        X = rng.uniform(0.5, 3.0, (8, nvars))
        preds, _ = forward_many(params, X)
        y = preds - rng.uniform(-2.0, 2.0, 8)
        l1, l2 = penalties[trial % len(penalties)]
        _, grads = backward(params, (X, y), l1, l2)
        fW, fc, fb = _fd_loss_gradient(params, (X, y), l1, l2)
        aW = grads.weight_matrix()
        ac = np.asarray(grads.output_weights)
        for a, f in [(aW, fW), (ac, fc), (np.array([grads.output_bias]), np.array([fb]))]:
            rel = np.abs(a - f) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(f)))
            worst = max(worst, float(rel.max()))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-5 and elapsed < 30.0
    _verdict(1, ok, f"100 configs, worst per-coordinate error {worst:.2e}, {elapsed:.1f}s")
    assert worst <= 1e-5
    assert elapsed < 30.0


def test_criterion_02_extraction_equivalence():
    rng = np.random.default_rng(54321)
    worst = 0.0
    for _ in range(100):
        nvars = int(rng.integers(1, 5))
        blocks = int(rng.integers(1, 5))
        params = _random_params(rng, nvars, blocks)
        X = rng.uniform(0.5, 3.0, (50, nvars))
        preds, _ = forward_many(params, X)
        values = evaluate_many(extract_equation(params), X)
        rel = np.abs(preds - values) / (1.0 + np.abs(preds))
        worst = max(worst, float(rel.max()))
    ok = worst <= 1e-9
    _verdict(2, ok, f"100 parameter sets x 50 points, worst relative gap {worst:.2e}")
    assert worst <= 1e-9


@pytest.fixture(scope="module")
def desk_run():
    suite = load_suite(DESK_SUITE)
    start = time.perf_counter()
    results, summary = run_suite(suite)
    return results, summary, time.perf_counter() - start


def test_criterion_03_desk_recovery_suite(desk_run):
    results, summary, elapsed = desk_run
    rate = summary["solution_rate"]
    ok = rate >= 80.0 and elapsed <= 900.0
    _verdict(3, ok, f"desk suite solution rate {rate:.1f}% over "
                    f"{summary['cells']} cells in {elapsed:.0f}s")
    assert rate >= 80.0
    assert elapsed <= 900.0


def test_criterion_04_growth_stops_near_term_count():
    gt = parse_equation("3*x1 + 2*x2", 2)
    hits = 0
    sizes = []
    for seed in range(5):
        ds = generate(gt, SamplingSpec(ranges=((0.5, 3.0), (0.5, 3.0)),
                                       n_points=1500, seed=seed))
        report = fit(ds, TrainConfig(master_seed=seed))
        sizes.append(report.best.blocks_used)
        if report.best.blocks_used <= 3:
            hits += 1
    ok = hits >= 4
    _verdict(4, ok, f"two-term target used blocks {sizes}, {hits}/5 runs <= 3 blocks")
    assert hits >= 4


def _sampled_inputs(rng, ranges, n):
    return np.column_stack([rng.uniform(lo, hi, n) for lo, hi in ranges])


def _nonlp_datasets():
    """Ten targets that are not Laurent polynomials: fractional exponents,
    optionally mixed with sine or exponential factors."""
    fractional = [
        "x1^0.5",
        "x1^2.5",
        "x1^1.5*x2^-0.5",
        "x1^0.5 + x2",
        "2*x1^-0.5",
        "x1^0.5*x2^0.5",
        "x1 + x1^0.5",
    ]
    out = []
    for i, eq in enumerate(fractional):
        nvars = 2 if "x2" in eq else 1
        ranges = ((0.5, 3.0),) * nvars
        out.append((eq, generate(parse_equation(eq, nvars),
                                 SamplingSpec(ranges=ranges, n_points=1000, seed=100 + i))))
    rng = np.random.default_rng(77)
    specials = [
        ("sin(x1)*x2^0.5", lambda X: np.sin(X[:, 0]) * np.sqrt(X[:, 1])),
        ("exp(x1)*x2^0.5", lambda X: np.exp(X[:, 0]) * np.sqrt(X[:, 1])),
        ("sin(x1) + x2^0.5", lambda X: np.sin(X[:, 0]) + np.sqrt(X[:, 1])),
    ]
    for label, fn in specials:
        X = _sampled_inputs(rng, ((0.5, 3.0), (0.5, 3.0)), 1000)
        out.append((label, Dataset(inputs=X, targets=fn(X), column_names=("x1", "x2"))))
    return out


def _lp_datasets():
    targets = ["x1", "2*x1", "x1*x2", "x1^2", "0.5*x1^2", "x1^2*x2^-1",
               "x1 + x2", "3*x1 + 2*x2", "x1*x2*x3", "x1^-1"]
    out = []
    for i, eq in enumerate(targets):
        nvars = 3 if "x3" in eq else (2 if "x2" in eq else 1)
        ranges = ((0.5, 3.0),) * nvars
        out.append((eq, generate(parse_equation(eq, nvars),
                                 SamplingSpec(ranges=ranges, n_points=2500, seed=200 + i))))
    return out


def test_criterion_05_lp_classification_soundness():
    false_positives = []
    for label, ds in _nonlp_datasets():
        report = fit(ds, TrainConfig(master_seed=0))
        if classify_lp(report.best.equation).is_lp:
            false_positives.append(label)
    true_positives = 0
    misses = []
    for label, ds in _lp_datasets():
        report = fit(ds, TrainConfig(master_seed=0))
        if classify_lp(report.best.equation).is_lp:
            true_positives += 1
        else:
            misses.append(label)
    ok = not false_positives and true_positives >= 8
    _verdict(5, ok, f"non-LP flagged {10 - len(false_positives)}/10 "
                    f"(false positives: {false_positives or 'none'}), "
                    f"LP accepted {true_positives}/10 (missed: {misses or 'none'})")
    assert not false_positives
    assert true_positives >= 8


def test_criterion_06_noise_tolerance_on_desk_suite():
    suite = replace(load_suite(DESK_SUITE), noise_fractions=(0.1,))
    results, summary = run_suite(suite)
    per_fixture = {}
    for entry in suite.entries:
        scores = sorted(r.r2_clean for r in results if r.entry == entry.name)
        per_fixture[entry.name] = scores[len(scores) // 2]  # median of 5 trials
    passing = sum(1 for v in per_fixture.values() if v > 0.99)
    ok = passing >= 5
    detail = ", ".join(f"{k}={v:.4f}" for k, v in per_fixture.items())
    _verdict(6, ok, f"noise 0.1: clean-signal R2 medians {detail} -> {passing}/6 fixtures")
    assert passing >= 5


def test_criterion_07_irrelevant_input_robustness():
    hits = 0
    found = []
    for seed in range(5):
        spec = SamplingSpec(ranges=((0.5, 3.0), (0.5, 3.0)), n_points=10000,
                            irrelevant_inputs=1, seed=seed)
        ds = generate(parse_equation("x1^2*x2^-1", 2), spec)
        report = fit(ds, TrainConfig(master_seed=seed))
        gt = parse_equation("x1^2*x2^-1", ds.inputs.shape[1])
        eq = report.best.equation
        if report.lp_verdict:
            eq = snap_integer_exponents(eq)
        recovered = report.lp_verdict and equals_exact(eq, gt, 1e-3)
        found.append(recovered)
        hits += recovered
    ok = hits >= 3
    _verdict(7, ok, f"power ratio with 1 irrelevant input recovered in {hits}/5 seeds")
    assert hits >= 3


def test_criterion_08_search_space_counts():
    mismatches = []
    for order in range(11):
        for nvars in range(11):
            got = search_space(order, nvars)
            t = math.comb(order + nvars, nvars)
            if got.term_count != t or got.structure_count != 2 ** t:
                mismatches.append((order, nvars))
    spot = search_space(2, 2)
    ok = not mismatches and spot.term_count == 6 and spot.structure_count == 64
    _verdict(8, ok, f"121 (order, vars) pairs match big-integer counts; "
                    f"T(2,2)={spot.term_count} S={spot.structure_count}")
    assert not mismatches
    assert (spot.term_count, spot.structure_count) == (6, 64)


def _candidate(eq: str, nvars: int, mse: float, alpha: float, instance: int) -> EquationCandidate:
    poly = parse_equation(eq, nvars)
    cx = complexity(poly)
    return EquationCandidate(equation=poly, mse=mse, complexity=cx,
                             symbolic_error=mse + alpha * cx.total,
                             instance_id=instance, blocks_used=len(poly.terms),
                             growth_trace=(mse,))


def test_criterion_09_model_selection_ordering():
    rng = np.random.default_rng(9)
    pool = [("x1", 1), ("x1^2", 1), ("x1^2*x2^-1", 2), ("3*x1 + 2*x2", 2),
            ("0.5*x1*x2^2 + 0.5*x1*x3^2", 3)]
    ok_pairs = True
    for trial in range(50):
        mse = float(rng.uniform(1e-8, 1.0)) if trial % 10 else 1e10  # huge mse absorbs alpha
        a, b = rng.choice(len(pool), 2, replace=False)
        cands = [_candidate(pool[a][0], pool[a][1], mse, 1e-6, 0),
                 _candidate(pool[b][0], pool[b][1], mse, 1e-6, 1)]
        best = min(cands, key=selection_key)
        if best.complexity.total != min(c.complexity.total for c in cands):
            ok_pairs = False
    # alpha = 0 reduces selection to the MSE argmin
    plain = [_candidate("0.5*x1*x2^2 + 0.5*x1*x3^2", 3, 0.002, 0.0, 0),
             _candidate("x1", 1, 0.005, 0.0, 1),
             _candidate("x1^2*x2^-1", 2, 0.001, 0.0, 2)]
    ok_alpha0 = min(plain, key=selection_key).mse == 0.001
    # exact ties fall to the lower instance id, independent of list order
    tied = [_candidate("x1^2", 1, 0.5, 1e-6, i) for i in (2, 0, 1)]
    ok_tie = min(tied, key=selection_key).instance_id == 0
    ok = ok_pairs and ok_alpha0 and ok_tie
    _verdict(9, ok, "equal-MSE pairs prefer lower complexity; alpha=0 is MSE argmin; "
                    "ties break on instance id")
    assert ok_pairs and ok_alpha0 and ok_tie


def _run_cli(argv, cwd):
    return subprocess.run([sys.executable, "-m", "lpgrow.cli", *argv],
                          capture_output=True, text=True, cwd=cwd)


def test_criterion_10_byte_identical_reports(tmp_path):
    ds = generate(parse_equation("x1", 1),
                  SamplingSpec(ranges=((0.5, 3.0),), n_points=500, seed=5))
    from lpgrow.data import save_csv
    data = tmp_path / "data.csv"
    save_csv(ds, data)
    cfg = tmp_path / "config.json"
    cfg.write_text(TrainConfig(instances=2, max_blocks=2).to_json(), encoding="utf-8")
    fit_bytes = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        proc = _run_cli(["fit", "--data", str(data), "--config", str(cfg),
                         "--seed", "7", "--out", str(out)], tmp_path)
        assert proc.returncode == 0, proc.stderr
        fit_bytes.append(out.read_bytes())
    suite = tmp_path / "suite.json"
    suite.write_text(json.dumps({
        "entries": [{"name": "identity", "equation": "x1",
                     "ranges": [[0.5, 3.0]], "n_points": 600}],
        "trials": 1, "master_seed": 11}), encoding="utf-8")
    bench_bytes = []
    for name in ("r1", "r2"):
        out_dir = tmp_path / name
        proc = _run_cli(["benchmark", "--suite", str(suite),
                         "--out-dir", str(out_dir)], tmp_path)
        assert proc.returncode == 0, proc.stderr
        bench_bytes.append((out_dir / "results.csv").read_bytes()
                           + (out_dir / "summary.json").read_bytes())
    ok = fit_bytes[0] == fit_bytes[1] and bench_bytes[0] == bench_bytes[1]
    _verdict(10, ok, "fit report and benchmark outputs byte-identical across reruns")
    assert fit_bytes[0] == fit_bytes[1]
    assert bench_bytes[0] == bench_bytes[1]
