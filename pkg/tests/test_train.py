"""Growth trainer: config io, schedule, kernel-vs-reference equivalence,
recovery behavior, model selection, determinism, abort handling."""
import json
import math

import numpy as np
import pytest

from lpgrow.data import Dataset, SamplingSpec, generate
from lpgrow.network import NetworkParams, OptimizerState, adam_step, backward
from lpgrow.poly import ComplexityBreakdown, LaurentPolynomial, parse_equation, print_equation
from lpgrow.train import (
    DEFAULT_LR_DECAY,
    EquationCandidate,
    TrainConfig,
    _run_stage,
    derive_instance_seed,
    fit,
    regularization_schedule,
    selection_key,
    train_instance,
)


def make_dataset(equation, ranges, n, seed, noise=0.0, irrelevant=0):
    return generate(parse_equation(equation, len(ranges)),
                    SamplingSpec(ranges=ranges, n_points=n, noise_fraction=noise,
                                 irrelevant_inputs=irrelevant, seed=seed))


# ------------------------------------------------------------------ config

def test_config_defaults():
    cfg = TrainConfig()
    assert cfg.instances == 4
    assert cfg.complexity_weight == 1e-6
    assert cfg.l1 == cfg.l2 == 1e-4
    assert cfg.max_blocks == 4
    assert cfg.epochs_per_stage == 500
    assert cfg.rounding_precision == 0.001
    assert cfg.early_stop_ratio == 0.8
    assert cfg.reg_switch_fraction == 0.5
    assert cfg.validation_fraction == 0.2


def test_config_json_round_trip():
    cfg = TrainConfig(instances=2, max_blocks=3, master_seed=17)
    assert TrainConfig.from_json(cfg.to_json()) == cfg


def test_config_from_json_applies_defaults_for_missing_keys():
    cfg = TrainConfig.from_json('{"instances": 2}')
    assert cfg.instances == 2
    assert cfg.max_blocks == 4


def test_config_from_json_rejects_unknown_keys():
    with pytest.raises(ValueError):
        TrainConfig.from_json('{"instances": 2, "turbo": true}')


@pytest.mark.parametrize("kwargs", [
    {"instances": 0},
    {"max_blocks": 0},
    {"early_stop_ratio": 0.0},
    {"early_stop_ratio": 1.0},
    {"reg_switch_fraction": 1.5},
    {"validation_fraction": 0.0},
    {"epochs_per_stage": 0},
    {"rounding_precision": 0.0},
    {"batch_size": 0},
    {"base_lr": 0.0},
    {"l1": -1.0},
    {"master_seed": -3},
])
def test_config_validation_rejects(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs)


# ---------------------------------------------------------------- schedule

def test_schedule_two_phases():
    cfg = TrainConfig()
    assert regularization_schedule(0, cfg) == (1e-4, 1e-4)
    assert regularization_schedule(249, cfg) == (1e-4, 1e-4)
    assert regularization_schedule(250, cfg) == (0.0, 0.0)
    assert regularization_schedule(499, cfg) == (0.0, 0.0)


def test_schedule_extreme_fractions():
    always = TrainConfig(reg_switch_fraction=1.0)
    never = TrainConfig(reg_switch_fraction=0.0)
    assert regularization_schedule(499, always) == (1e-4, 1e-4)
    assert regularization_schedule(0, never) == (0.0, 0.0)


def test_schedule_rejects_out_of_range_epoch():
    with pytest.raises(ValueError):
        regularization_schedule(500, TrainConfig())
    with pytest.raises(ValueError):
        regularization_schedule(-1, TrainConfig())


def test_default_decay_reaches_one_percent_per_stage():
    assert DEFAULT_LR_DECAY ** 500 == pytest.approx(0.01, rel=1e-12)


# ------------------------------------------------------------------- seeds

def test_instance_seeds_deterministic_and_distinct():
    seeds = [derive_instance_seed(0, i) for i in range(8)]
    assert seeds == [derive_instance_seed(0, i) for i in range(8)]
    assert len(set(seeds)) == 8
    assert derive_instance_seed(1, 0) != derive_instance_seed(0, 0)


# ------------------------------------------------- kernel vs reference math

def test_stage_kernel_matches_backward_adam_reference():
    """The compiled stage loop must reproduce network.backward +
    network.adam_step batch for batch."""
    rng = np.random.default_rng(123)
    n, d, blocks = 40, 2, 2
    X = rng.uniform(0.5, 3.0, (n, d))
    y = X[:, 0] * X[:, 1] + rng.normal(0, 0.1, n)
    XL = np.log(X)
    epochs, batch_size, switch_x = 3, 16, 1.5
    lam1, lam2, base_lr, decay = 1e-4, 1e-4, 0.01, 0.99

    W0 = rng.uniform(-0.5, 0.5, (blocks, d))
    c0 = rng.uniform(-0.5, 0.5, blocks)
    bias0 = 0.25
    perms = np.tile(np.arange(n), (epochs, 1))
    rng.permuted(perms, axis=1, out=perms)

    # compiled kernel, in place
    W = W0.copy(); c = c0.copy(); bias = np.array([bias0])
    mW, vW = np.zeros_like(W), np.zeros_like(W)
    mc, vc = np.zeros(blocks), np.zeros(blocks)
    mb, vb = np.zeros(1), np.zeros(1)
    finite, steps = _run_stage(W, c, bias, mW, vW, mc, vc, mb, vb, 0,
                               XL, y, perms, batch_size, switch_x,
                               lam1, lam2, base_lr, decay)
    assert finite
    assert steps == epochs * math.ceil(n / batch_size)

    # pure reference loop
    params = NetworkParams.from_arrays(W0.copy(), c0.copy(), bias0)
    state = OptimizerState.fresh(params, base_lr=base_lr, decay=decay)
    for epoch in range(epochs):
        l1, l2 = (lam1, lam2) if epoch < switch_x else (0.0, 0.0)
        for start in range(0, n, batch_size):
            idx = perms[epoch, start:start + batch_size]
            _, grads = backward(params, (X[idx], y[idx]), l1, l2)
            params, state = adam_step(params, grads, state, epoch=epoch)

    np.testing.assert_allclose(W, params.weight_matrix(), rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(c, np.asarray(params.output_weights), rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(bias[0], params.output_bias, rtol=1e-9, atol=1e-12)
    assert state.step_count == steps
    np.testing.assert_allclose(mW, state.first_moment.weight_matrix(), rtol=1e-9, atol=1e-14)
    np.testing.assert_allclose(vW, state.second_moment.weight_matrix(), rtol=1e-9, atol=1e-14)


def test_stage_kernel_aborts_on_nonfinite_loss():
    XL = np.zeros((4, 1))
    y = np.full(4, 1e200)  # squared residual overflows on the first batch
    perms = np.tile(np.arange(4), (2, 1))
    W = np.array([[0.0]]); c = np.array([1.0]); bias = np.zeros(1)
    zeros = lambda *s: np.zeros(s)
    finite, steps = _run_stage(W, c, bias, zeros(1, 1), zeros(1, 1), zeros(1),
                               zeros(1), zeros(1), zeros(1), 0,
                               XL, y, perms, 4, 1.0, 0.0, 0.0, 0.01, 1.0)
    assert not finite
    assert steps == 0


# ---------------------------------------------------------------- recovery

def test_fit_recovers_identity_equation():
    ds = make_dataset("x1", ((0.5, 3.0),), 1000, seed=7)
    report = fit(ds, TrainConfig(master_seed=3))
    assert print_equation(report.best.equation) == "x1"
    assert report.best.blocks_used == 1
    assert report.best.mse < 1e-6
    assert report.lp_verdict
    assert report.error is None


def test_fit_recovers_power_ratio_for_most_seeds():
    hits = 0
    for seed in range(5):
        ds = make_dataset("x1^2*x2^-1", ((0.5, 3.0), (0.5, 3.0)), 800, seed=seed)
        report = fit(ds, TrainConfig(master_seed=seed))
        if print_equation(report.best.equation) == "x1^2*x2^-1":
            hits += 1
    assert hits >= 3


def test_fit_two_term_target_stays_small():
    ds = make_dataset("3*x1 + 2*x2", ((0.5, 3.0), (0.5, 3.0)), 1500, seed=2)
    report = fit(ds, TrainConfig(master_seed=1))
    assert report.best.blocks_used <= 3
    assert report.best.mse < 1e-4


# ----------------------------------------------------------- fit invariants

def test_fit_symbolic_error_definition_holds_for_all_candidates():
    ds = make_dataset("x1", ((0.5, 3.0),), 400, seed=1)
    cfg = TrainConfig(master_seed=5)
    report = fit(ds, cfg)
    for cand in report.all_candidates:
        if math.isfinite(cand.mse):
            assert cand.symbolic_error == pytest.approx(
                cand.mse + cfg.complexity_weight * cand.complexity.total, rel=1e-12)


def test_fit_best_minimizes_selection_key():
    ds = make_dataset("x1*x2^-1", ((0.5, 3.0), (0.5, 3.0)), 500, seed=3)
    report = fit(ds, TrainConfig(master_seed=2))
    assert selection_key(report.best) == min(selection_key(c)
                                             for c in report.all_candidates)
    assert len(report.all_candidates) == 4
    assert {c.instance_id for c in report.all_candidates} == {0, 1, 2, 3}


def test_fit_deterministic_across_runs():
    ds = make_dataset("0.5*x1^2", ((0.5, 3.0),), 600, seed=9)
    a = fit(ds, TrainConfig(master_seed=11))
    b = fit(ds, TrainConfig(master_seed=11))
    assert a == b
    assert a.wall_time == 0.0


def test_fit_wall_time_only_with_record_timings():
    ds = make_dataset("x1", ((0.5, 3.0),), 300, seed=4)
    timed = fit(ds, TrainConfig(instances=1, max_blocks=1, master_seed=0),
                record_timings=True)
    assert timed.wall_time > 0.0


def test_train_instance_deterministic():
    ds = make_dataset("x1", ((0.5, 3.0),), 400, seed=6)
    cfg = TrainConfig(master_seed=0)
    a = train_instance(ds, cfg, instance_seed=1234, instance_id=0)
    b = train_instance(ds, cfg, instance_seed=1234, instance_id=0)
    assert a == b
    assert 1 <= a.blocks_used <= len(a.growth_trace)


def test_train_instance_rejects_tiny_dataset():
    ds = Dataset(inputs=np.array([[1.0], [2.0]]), targets=np.array([1.0, 2.0]),
                 column_names=("x1",))
    with pytest.raises(ValueError):
        train_instance(ds, TrainConfig(), instance_seed=0)


# ------------------------------------------------------------------- abort

def test_fit_flags_total_abort():
    rng = np.random.default_rng(0)
    inputs = rng.uniform(0.5, 3.0, (50, 1))
    ds = Dataset(inputs=inputs, targets=np.full(50, 1e200), column_names=("x1",))
    report = fit(ds, TrainConfig(instances=2, master_seed=0))
    assert report.error is not None
    assert not report.lp_verdict
    assert math.isinf(report.best.mse)
    assert report.best.blocks_used == 0
    assert report.best.equation.is_zero


# ------------------------------------------------------------ selection key

def _cand(se, total, instance_id, mse=None):
    return EquationCandidate(
        equation=LaurentPolynomial(1, ()),
        mse=se if mse is None else mse,
        complexity=ComplexityBreakdown(0, 0, total, total),
        symbolic_error=se,
        instance_id=instance_id,
        blocks_used=1,
        growth_trace=(0.0,),
    )


def test_selection_prefers_lower_symbolic_error():
    a, b = _cand(1e-3, 5, 0), _cand(1e-4, 9, 1)
    assert min([a, b], key=selection_key) is b


def test_selection_tie_breaks_on_complexity_then_instance():
    a, b = _cand(1e-3, 9, 0), _cand(1e-3, 5, 1)
    assert min([a, b], key=selection_key) is b
    c, d = _cand(1e-3, 5, 2), _cand(1e-3, 5, 1)
    assert min([c, d], key=selection_key) is d
