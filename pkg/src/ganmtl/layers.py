"""Differentiable layers: dense, bidirectional LSTM, conv block, batch norm.

Forwards take the active ``Tape`` as their first argument and leave every
intermediate on it, so gradients flow to all registered parameters.  The
sequence layers operate on a batch of sequences ``[B, T, features]``; the
single-sequence entry points reshape through the batched path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import Rng
from .tensor import Param, ShapeError, Tape, Tensor

ACTIVATIONS = ("none", "tanh", "sigmoid", "lrelu")


@dataclass
class DenseLayer:
    """Affine map with an optional pointwise activation."""

    w: Param  # [in, out]
    b: Param  # [out]
    activation: str = "none"
    lrelu_alpha: float = 0.2

    @property
    def in_dim(self) -> int:
        return self.w.value.shape[0]

    @property
    def out_dim(self) -> int:
        return self.w.value.shape[1]

    def params(self) -> list[Param]:
        return [self.w, self.b]


def dense_forward(tape: Tape, layer: DenseLayer, x: Tensor) -> Tensor:
    if x.shape[-1] != layer.in_dim:
        raise ShapeError(f"dense: input width {x.shape} does not match W {layer.w.value.shape}")
    h = tape.add(tape.matmul(x, tape.param(layer.w)), tape.param(layer.b))
    if layer.activation == "none":
        return h
    if layer.activation == "tanh":
        return tape.tanh(h)
    if layer.activation == "sigmoid":
        return tape.sigmoid(h)
    if layer.activation == "lrelu":
        return tape.lrelu(h, alpha=layer.lrelu_alpha)
    raise ValueError(f"unknown activation {layer.activation!r}")


# ---------------------------------------------------------------------------
# LSTM


@dataclass
class LstmDirection:
    """One direction's gate parameters, fused as [in, 4H] / [H, 4H] / [4H].

    Gate order along the fused axis: input, forget, output, candidate.
    """

    wx: Param
    wh: Param
    b: Param

    @property
    def hidden(self) -> int:
        return self.wh.value.shape[0]

    @property
    def in_dim(self) -> int:
        return self.wx.value.shape[0]

    def params(self) -> list[Param]:
        return [self.wx, self.wh, self.b]


@dataclass
class RecurrentParams:
    """A bidirectional LSTM layer: two direction parameter sets of equal shape."""

    fw: LstmDirection
    bw: LstmDirection

    def __post_init__(self):
        for a, b in zip(self.fw.params(), self.bw.params()):
            if a.value.shape != b.value.shape:
                raise ShapeError(
                    f"recurrent: direction shapes differ, {a.value.shape} vs {b.value.shape}")

    @property
    def hidden(self) -> int:
        return self.fw.hidden

    @property
    def in_dim(self) -> int:
        return self.fw.in_dim

    def params(self) -> list[Param]:
        return self.fw.params() + self.bw.params()


def _split_timesteps(tape: Tape, seq3: Tensor) -> list[Tensor]:
    """[B, T, F] -> T tensors of [B, F]."""
    B, T, F = seq3.shape
    out = []
    for t in range(T):
        sl = tape.slice(seq3, axis=1, start=t, stop=t + 1)
        out.append(tape.reshape(sl, (B, F)))
    return out


def _lstm_direction(tape: Tape, d: LstmDirection, xs: list[Tensor], reverse: bool) -> list[Tensor]:
    """Run one direction over per-timestep inputs; returns h_t per step."""
    B = xs[0].shape[0]
    H = d.hidden
    wx, wh, b = tape.param(d.wx), tape.param(d.wh), tape.param(d.b)
    h = tape.leaf(Tensor(np.zeros((B, H))))
    c = tape.leaf(Tensor(np.zeros((B, H))))
    order = range(len(xs) - 1, -1, -1) if reverse else range(len(xs))
    hs: list[Tensor | None] = [None] * len(xs)
    for t in order:
        gates = tape.add(tape.add(tape.matmul(xs[t], wx), tape.matmul(h, wh)), b)
        hc = tape.lstm_step(gates, c, hidden=H)
        h = tape.slice(hc, 1, 0, H)
        c = tape.slice(hc, 1, H, 2 * H)
        hs[t] = h
    return hs  # type: ignore[return-value]


def bilstm_apply(tape: Tape, params: RecurrentParams, seq3: Tensor) -> Tensor:
    """Batched bidirectional pass: [B, T, in] -> [B, T, 2H].

    Initial hidden and cell states are zero in both directions; the output
    at each step is the forward hidden state concatenated with the backward
    one.
    """
    if len(seq3.shape) != 3:
        raise ShapeError(f"bilstm: expects [B, T, features], got {seq3.shape}")
    B, T, F = seq3.shape
    if T == 0:
        raise ShapeError("bilstm: empty sequence")
    if F != params.in_dim:
        raise ShapeError(f"bilstm: input width {F} does not match parameters ({params.in_dim})")
    xs = _split_timesteps(tape, seq3)
    hf = _lstm_direction(tape, params.fw, xs, reverse=False)
    hb = _lstm_direction(tape, params.bw, xs, reverse=True)
    H2 = 2 * params.hidden
    steps = [tape.reshape(tape.concat([hf[t], hb[t]], axis=1), (B, 1, H2)) for t in range(T)]
    return steps[0] if T == 1 else tape.concat(steps, axis=1)


def bilstm_forward(tape: Tape, params: RecurrentParams, seq: Tensor) -> Tensor:
    """Single-sequence wrapper: [T, in] -> [T, 2H]."""
    if len(seq.shape) != 2:
        raise ShapeError(f"bilstm: expects [T, features], got {seq.shape}")
    T, F = seq.shape
    seq3 = tape.reshape(seq, (1, T, F))
    out = bilstm_apply(tape, params, seq3)
    return tape.reshape(out, (T, 2 * params.hidden))


# ---------------------------------------------------------------------------
# convolution block and batch norm


@dataclass
class Conv2dLayer:
    """5x5 same-padding convolution, stride 1."""

    kernels: Param  # [out_ch, in_ch, 5, 5]
    bias: Param     # [out_ch]

    @property
    def in_channels(self) -> int:
        return self.kernels.value.shape[1]

    @property
    def out_channels(self) -> int:
        return self.kernels.value.shape[0]

    def params(self) -> list[Param]:
        return [self.kernels, self.bias]


@dataclass
class BatchNorm:
    """Feature-wise batch normalization with running statistics.

    ``momentum`` is the weight given to the new batch statistic in the
    running update.  Running variance tracks the population (biased) batch
    variance.  Train mode normalizes by batch statistics; infer mode by the
    running buffers.
    """

    gamma: Param
    beta: Param
    running_mean: Tensor
    running_var: Tensor
    eps: float = 1e-8
    momentum: float = 0.1

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError(f"batchnorm: eps must be positive, got {self.eps}")

    @property
    def features(self) -> int:
        return self.gamma.value.shape[0]

    def params(self) -> list[Param]:
        return [self.gamma, self.beta]

    def buffers(self) -> dict[str, Tensor]:
        return {"running_mean": self.running_mean, "running_var": self.running_var}


def make_batchnorm(name: str, features: int, eps: float = 1e-8, momentum: float = 0.1) -> BatchNorm:
    return BatchNorm(
        gamma=Param(f"{name}.gamma", np.ones(features)),
        beta=Param(f"{name}.beta", np.zeros(features)),
        running_mean=Tensor(np.zeros(features)),
        running_var=Tensor(np.ones(features)),
        eps=eps,
        momentum=momentum,
    )


def batchnorm_forward(tape: Tape, bn: BatchNorm, x: Tensor, mode: str = "train",
                      update_running: bool = True) -> Tensor:
    """Normalize per feature; [B, F] over axis 0, [B, C, H, W] over (0, 2, 3)."""
    if mode not in ("train", "infer"):
        raise ValueError(f"batchnorm: mode must be 'train' or 'infer', got {mode!r}")
    ndim = len(x.shape)
    if ndim == 2:
        axes, bshape = 0, (1, bn.features)
    elif ndim == 4:
        axes, bshape = (0, 2, 3), (1, bn.features, 1, 1)
    else:
        raise ShapeError(f"batchnorm: expects 2-d or 4-d input, got {x.shape}")
    if x.shape[1] != bn.features:
        raise ShapeError(f"batchnorm: {x.shape} has {x.shape[1]} features, expected {bn.features}")
    if mode == "train":
        if x.shape[0] < 2:
            raise ShapeError(f"batchnorm: train mode needs batch >= 2, got {x.shape[0]}")
        m = tape.mean(x, axis=axes)
        centered = tape.sub(x, tape.reshape(m, bshape))
        v = tape.mean(tape.square(centered), axis=axes)
        if update_running:
            mom = bn.momentum
            bn.running_mean.data[...] = (1 - mom) * bn.running_mean.data + mom * m.data
            bn.running_var.data[...] = (1 - mom) * bn.running_var.data + mom * v.data
    else:
        m = tape.leaf(Tensor(bn.running_mean.data.copy()))
        v = tape.leaf(Tensor(bn.running_var.data.copy()))
        centered = tape.sub(x, tape.reshape(m, bshape))
    denom = tape.sqrt(tape.add(tape.reshape(v, bshape), Tensor(bn.eps)))
    normed = tape.div(centered, denom)
    scaled = tape.mul(normed, tape.reshape(tape.param(bn.gamma), bshape))
    return tape.add(scaled, tape.reshape(tape.param(bn.beta), bshape))


def conv_block_forward(tape: Tape, conv: Conv2dLayer, bn: BatchNorm, x: Tensor,
                       mode: str = "train", lrelu_alpha: float = 0.2,
                       update_running: bool = True) -> Tensor:
    """conv -> LReLU -> batch norm, the discriminator's building block."""
    if len(x.shape) != 4:
        raise ShapeError(f"conv block: expects [B, C, H, W], got {x.shape}")
    if x.shape[1] != conv.in_channels:
        raise ShapeError(
            f"conv block: {x.shape[1]} input channels, kernels expect {conv.in_channels}")
    y = tape.conv2d(x, tape.param(conv.kernels))
    y = tape.add(y, tape.reshape(tape.param(conv.bias), (1, conv.out_channels, 1, 1)))
    y = tape.lrelu(y, alpha=lrelu_alpha)
    return batchnorm_forward(tape, bn, y, mode=mode, update_running=update_running)


# ---------------------------------------------------------------------------
# initialization


def glorot_uniform(rng: Rng, shape, fan_in: int, fan_out: int) -> np.ndarray:
    """Uniform(-s, s) with s = sqrt(6 / (fan_in + fan_out))."""
    s = float(np.sqrt(6.0 / (fan_in + fan_out)))
    return rng.uniform(shape, -s, s)


def make_dense(rng: Rng, name: str, in_dim: int, out_dim: int, activation: str = "none",
               lrelu_alpha: float = 0.2) -> DenseLayer:
    w = glorot_uniform(rng, (in_dim, out_dim), in_dim, out_dim)
    return DenseLayer(
        w=Param(f"{name}.w", w),
        b=Param(f"{name}.b", np.zeros(out_dim)),
        activation=activation,
        lrelu_alpha=lrelu_alpha,
    )


def make_lstm_direction(rng: Rng, name: str, in_dim: int, hidden: int) -> LstmDirection:
    return LstmDirection(
        wx=Param(f"{name}.wx", glorot_uniform(rng, (in_dim, 4 * hidden), in_dim, 4 * hidden)),
        wh=Param(f"{name}.wh", glorot_uniform(rng, (hidden, 4 * hidden), hidden, 4 * hidden)),
        b=Param(f"{name}.b", np.zeros(4 * hidden)),
    )


def make_recurrent(rng: Rng, name: str, in_dim: int, hidden: int) -> RecurrentParams:
    return RecurrentParams(
        fw=make_lstm_direction(rng, f"{name}.fw", in_dim, hidden),
        bw=make_lstm_direction(rng, f"{name}.bw", in_dim, hidden),
    )


def make_conv(rng: Rng, name: str, in_ch: int, out_ch: int, ksize: int = 5) -> Conv2dLayer:
    fan_in = in_ch * ksize * ksize
    fan_out = out_ch * ksize * ksize
    k = glorot_uniform(rng, (out_ch, in_ch, ksize, ksize), fan_in, fan_out)
    return Conv2dLayer(kernels=Param(f"{name}.k", k), bias=Param(f"{name}.b", np.zeros(out_ch)))
