"""Power-term network: parallel blocks computing exp(sum_j w_j ln x_j),
combined by a linear output neuron with bias.

Each block represents one candidate polynomial term: its weights are the
exponents and the output-layer coefficient is the term coefficient, so a
trained network maps directly onto a Laurent polynomial. Everything here is
a pure function over immutable parameter containers; the optimized training
loop in train.py reproduces the same arithmetic on flat arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .poly import LaurentPolynomial, LaurentTerm, canonicalize

__all__ = [
    "PTABlockParams",
    "NetworkParams",
    "OptimizerState",
    "forward",
    "forward_many",
    "backward",
    "adam_step",
    "grow",
    "round_params",
    "snap_to_grid",
    "extract_equation",
    "CLAMP",
    "ADAM_BETA1",
    "ADAM_BETA2",
    "ADAM_EPS",
]

CLAMP = 50.0
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class PTABlockParams:
    """Exponent weights of one power-term block."""

    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not all(math.isfinite(w) for w in self.weights):
            raise ValueError("block weights must be finite")


@dataclass(frozen=True)
class NetworkParams:
    """All trainable parameters: block weights, output weights, output bias."""

    nvars: int
    blocks: tuple[PTABlockParams, ...]
    output_weights: tuple[float, ...]
    output_bias: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(
            self, "output_weights", tuple(float(c) for c in self.output_weights)
        )
        object.__setattr__(self, "output_bias", float(self.output_bias))
        if len(self.output_weights) != len(self.blocks):
            raise ValueError("one output weight per block required")
        for b in self.blocks:
            if len(b.weights) != self.nvars:
                raise ValueError("block width must equal nvars")
        if not math.isfinite(self.output_bias):
            raise ValueError("bias must be finite")

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @classmethod
    def empty(cls, nvars: int) -> "NetworkParams":
        return cls(nvars=nvars, blocks=(), output_weights=(), output_bias=0.0)

    def weight_matrix(self) -> np.ndarray:
        return np.array([b.weights for b in self.blocks], dtype=np.float64).reshape(
            self.n_blocks, self.nvars
        )

    @classmethod
    def from_arrays(cls, W: np.ndarray, c: np.ndarray, bias: float) -> "NetworkParams":
        return cls(
            nvars=W.shape[1],
            blocks=tuple(PTABlockParams(tuple(row)) for row in W),
            output_weights=tuple(float(v) for v in c),
            output_bias=float(bias),
        )


@dataclass(frozen=True)
class OptimizerState:
    """Adam accumulators, shaped exactly like the parameters they update."""

    step_count: int
    first_moment: NetworkParams
    second_moment: NetworkParams
    base_lr: float
    decay: float

    @classmethod
    def fresh(cls, params: NetworkParams, base_lr: float, decay: float) -> "OptimizerState":
        zeros = NetworkParams(
            nvars=params.nvars,
            blocks=tuple(PTABlockParams((0.0,) * params.nvars) for _ in params.blocks),
            output_weights=(0.0,) * params.n_blocks,
            output_bias=0.0,
        )
        return cls(step_count=0, first_moment=zeros, second_moment=zeros,
                   base_lr=base_lr, decay=decay)


def _check_positive(x: np.ndarray) -> None:
    if x.size and x.min() <= 0.0:
        raise ValueError("network inputs must be strictly positive")


def forward(params: NetworkParams, x) -> tuple[float, np.ndarray]:
    """Evaluate at one point; returns (prediction, per-block outputs).

    Accumulation is strictly sequential in block order so that appending a
    block never perturbs the contribution of existing blocks at bit level.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.nvars,):
        raise ValueError(f"expected input of length {params.nvars}")
    _check_positive(x)
    logx = np.log(x)
    blocks = np.empty(params.n_blocks)
    pred = params.output_bias
    for i, blk in enumerate(params.blocks):
        yd = 0.0
        for j in range(params.nvars):
            yd += blk.weights[j] * logx[j]
        yd = min(max(yd, -CLAMP), CLAMP)
        out = math.exp(yd)
        blocks[i] = out
        pred += params.output_weights[i] * out
    return pred, blocks


def forward_many(params: NetworkParams, X) -> tuple[np.ndarray, np.ndarray]:
    """Batched forward pass; same block order and clamping as forward."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.nvars:
        raise ValueError(f"expected (n, {params.nvars}) inputs")
    _check_positive(X)
    logx = np.log(X)
    W = params.weight_matrix()
    yd = np.clip(logx @ W.T, -CLAMP, CLAMP)
    blocks = np.exp(yd)
    preds = np.full(X.shape[0], params.output_bias)
    for i in range(params.n_blocks):
        preds = preds + params.output_weights[i] * blocks[:, i]
    return preds, blocks


def backward(params: NetworkParams, batch, l1: float, l2: float):
    """Mean-squared-error loss with L1/L2 penalties on block and output
    weights (never the bias), plus exact analytic gradients.

    loss = mean((pred - y)^2) + l1 * sum|W| + l2 * sum W^2. The clamp on the
    pre-exponential activation has zero derivative outside its interval, and
    the L1 subgradient at 0 is taken as 0.
    """
    X, y = batch
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.nvars or X.shape[0] != y.shape[0]:
        raise ValueError("batch shapes do not match the network")
    _check_positive(X)
    n = X.shape[0]
    logx = np.log(X)
    W = params.weight_matrix()
    c = np.asarray(params.output_weights, dtype=np.float64)
    raw = logx @ W.T
    live = (raw >= -CLAMP) & (raw <= CLAMP)
    blocks = np.exp(np.clip(raw, -CLAMP, CLAMP))
    preds = blocks @ c + params.output_bias
    resid = preds - y
    mse = float(resid @ resid / n)
    loss = mse + l1 * (np.abs(W).sum() + np.abs(c).sum()) + l2 * ((W ** 2).sum() + (c ** 2).sum())
    scale = 2.0 / n
    g_c = scale * (blocks.T @ resid) + l1 * np.sign(c) + 2.0 * l2 * c
    g_bias = scale * float(resid.sum())
    inner = (resid[:, None] * blocks * live) * c[None, :]
    g_W = scale * (inner.T @ logx) + l1 * np.sign(W) + 2.0 * l2 * W
    grads = NetworkParams.from_arrays(g_W, g_c, g_bias)
    return float(loss), grads


def adam_step(params: NetworkParams, grads: NetworkParams, state: OptimizerState,
              epoch: int) -> tuple[NetworkParams, OptimizerState]:
    """One Adam update with bias correction; the effective learning rate is
    base_lr * decay**epoch, so the schedule is driven by the caller's epoch
    counter rather than the step counter."""
    t = state.step_count + 1
    lr = state.base_lr * state.decay ** epoch
    c1 = 1.0 - ADAM_BETA1 ** t
    c2 = 1.0 - ADAM_BETA2 ** t

    def upd(p: float, g: float, m: float, v: float) -> tuple[float, float, float]:
        m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * g * g
        p = p - lr * (m / c1) / (math.sqrt(v / c2) + ADAM_EPS)
        return p, m, v

    new_blocks, m_blocks, v_blocks = [], [], []
    for blk, gblk, mblk, vblk in zip(params.blocks, grads.blocks,
                                     state.first_moment.blocks,
                                     state.second_moment.blocks):
        pw, mw, vw = [], [], []
        for p, g, m, v in zip(blk.weights, gblk.weights, mblk.weights, vblk.weights):
            p2, m2, v2 = upd(p, g, m, v)
            pw.append(p2); mw.append(m2); vw.append(v2)
        new_blocks.append(PTABlockParams(tuple(pw)))
        m_blocks.append(PTABlockParams(tuple(mw)))
        v_blocks.append(PTABlockParams(tuple(vw)))
    pc, mc, vc = [], [], []
    for p, g, m, v in zip(params.output_weights, grads.output_weights,
                          state.first_moment.output_weights,
                          state.second_moment.output_weights):
        p2, m2, v2 = upd(p, g, m, v)
        pc.append(p2); mc.append(m2); vc.append(v2)
    pb, mb, vb = upd(params.output_bias, grads.output_bias,
                     state.first_moment.output_bias,
                     state.second_moment.output_bias)
    nv = params.nvars
    new_params = NetworkParams(nv, tuple(new_blocks), tuple(pc), pb)
    new_state = OptimizerState(
        step_count=t,
        first_moment=NetworkParams(nv, tuple(m_blocks), tuple(mc), mb),
        second_moment=NetworkParams(nv, tuple(v_blocks), tuple(vc), vb),
        base_lr=state.base_lr,
        decay=state.decay,
    )
    return new_params, new_state


def grow(params: NetworkParams, init_scale: float, rng_seed) -> NetworkParams:
    """Append one freshly initialized block: its weights and output weight
    are drawn uniformly from [-init_scale, init_scale]; every existing
    parameter is carried over bit-identically."""
    rng = np.random.default_rng(rng_seed)
    w = rng.uniform(-init_scale, init_scale, params.nvars)
    c = float(rng.uniform(-init_scale, init_scale))
    return NetworkParams(
        nvars=params.nvars,
        blocks=params.blocks + (PTABlockParams(tuple(w)),),
        output_weights=params.output_weights + (c,),
        output_bias=params.output_bias,
    )


def snap_to_grid(values: np.ndarray, precision: float) -> np.ndarray:
    """Round to the nearest multiple of ``precision``, ties away from zero.

    Multiplying by the (integer) reciprocal of the precision and dividing
    back avoids the float dirt of precision * round(v / precision), which
    for precision 0.001 would turn 1.0 into 1.0000000000000002.
    """
    if precision <= 0.0:
        raise ValueError("precision must be positive")
    v = np.asarray(values, dtype=np.float64)
    inv = 1.0 / precision
    if abs(inv - round(inv)) < 1e-9:
        inv = float(round(inv))
        return np.sign(v) * np.floor(np.abs(v) * inv + 0.5) / inv
    return np.sign(v) * np.floor(np.abs(v) / precision + 0.5) * precision


def round_params(params: NetworkParams, precision: float) -> NetworkParams:
    """Snap every block weight, output weight and the bias to the precision
    grid; idempotent."""
    W = snap_to_grid(params.weight_matrix(), precision)
    c = snap_to_grid(np.asarray(params.output_weights, dtype=np.float64), precision)
    bias = float(snap_to_grid(np.asarray(params.output_bias), precision))
    return NetworkParams.from_arrays(W.reshape(params.n_blocks, params.nvars), c, bias)


def extract_equation(params: NetworkParams) -> LaurentPolynomial:
    """Read the network as a polynomial: block weights become exponent
    vectors, output weights become coefficients, the bias becomes the
    constant term. The result is canonical."""
    terms = [
        LaurentTerm(coefficient=c, exponents=blk.weights)
        for c, blk in zip(params.output_weights, params.blocks)
    ]
    if params.output_bias != 0.0:
        terms.append(LaurentTerm(params.output_bias, (0.0,) * params.nvars))
    return canonicalize(LaurentPolynomial(params.nvars, tuple(terms)))
