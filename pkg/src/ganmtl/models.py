"""Generator and discriminator architectures.

The generator maps per-frame noise plus linguistic conditions through a
feed-forward stack, a bidirectional recurrent stack, and a linear output
head; the condition vector is re-concatenated onto every hidden layer's
input.  The discriminator scores fixed-width acoustic windows as 2-D maps
(two conv blocks) with the condition injected both as a projected input
plane and alongside the flattened features, ending in either a binary
sigmoid unit or a phoneme-classification softmax.
"""

from __future__ import annotations

from dataclasses import dataclass

from .layers import (
    Conv2dLayer,
    BatchNorm,
    DenseLayer,
    RecurrentParams,
    bilstm_apply,
    conv_block_forward,
    dense_forward,
    make_batchnorm,
    make_conv,
    make_dense,
    make_recurrent,
)
from .rng import Rng
from .tensor import Param, ShapeError, Tape, Tensor


@dataclass(frozen=True)
class NoiseSpec:
    """Per-frame noise input: uniform on [lo, hi), dim components."""

    dim: int
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"noise dim must be >= 1, got {self.dim}")

    def sample(self, rng: Rng, frames: int):
        return rng.uniform((frames, self.dim), self.lo, self.hi)


@dataclass
class Generator:
    """Conditional sequence generator; noise_dim == 0 means condition-only input."""

    noise_dim: int
    cond_dim: int
    out_dim: int
    dense: list[DenseLayer]
    recurrent: list[RecurrentParams]
    out: DenseLayer

    def params(self) -> list[Param]:
        ps: list[Param] = []
        for layer in self.dense:
            ps += layer.params()
        for rec in self.recurrent:
            ps += rec.params()
        ps += self.out.params()
        return ps


@dataclass
class Discriminator:
    """Windowed acoustic critic with condition injection at input and features."""

    window: int
    cond_dim: int
    acoustic_dim: int
    head_kind: str  # "binary" | "pc"
    proj: DenseLayer
    conv1: Conv2dLayer
    bn1: BatchNorm
    conv2: Conv2dLayer
    bn2: BatchNorm
    fc: DenseLayer
    head: DenseLayer
    lrelu_alpha: float = 0.2

    def params(self) -> list[Param]:
        ps = self.proj.params() + self.conv1.params() + self.bn1.params()
        ps += self.conv2.params() + self.bn2.params()
        ps += self.fc.params() + self.head.params()
        return ps

    def buffers(self) -> dict[str, Tensor]:
        out = {}
        for tag, bn in (("bn1", self.bn1), ("bn2", self.bn2)):
            for key, buf in bn.buffers().items():
                out[f"{tag}.{key}"] = buf
        return out


# ---------------------------------------------------------------------------
# construction


def build_generator(rng: Rng, noise_dim: int, cond_dim: int, out_dim: int,
                    dense_widths=(64, 64, 64), rec_hidden: int = 32,
                    rec_layers: int = 2, name: str = "g") -> Generator:
    """Build and initialize a generator (Glorot-uniform weights, zero biases)."""
    if noise_dim < 0:
        raise ValueError(f"noise_dim must be >= 0, got {noise_dim}")
    dense = []
    width = noise_dim + cond_dim
    for k, w in enumerate(dense_widths):
        dense.append(make_dense(rng, f"{name}.dense{k}", width, w, activation="tanh"))
        width = w + cond_dim
    recurrent = []
    for k in range(rec_layers):
        recurrent.append(make_recurrent(rng, f"{name}.rec{k}", width, rec_hidden))
        width = 2 * rec_hidden + cond_dim
    out = make_dense(rng, f"{name}.out", width, out_dim, activation="none")
    return Generator(noise_dim, cond_dim, out_dim, dense, recurrent, out)


def build_discriminator(rng: Rng, window: int, cond_dim: int, acoustic_dim: int,
                        head_kind: str = "binary", classes: int = 0,
                        conv_channels=(8, 16), fc_width: int = 64,
                        bn_eps: float = 1e-8, bn_momentum: float = 0.1,
                        name: str = "d") -> Discriminator:
    """Build and initialize a discriminator; ``classes`` sizes the pc head."""
    if head_kind not in ("binary", "pc"):
        raise ValueError(f"head_kind must be 'binary' or 'pc', got {head_kind!r}")
    if head_kind == "pc" and classes < 2:
        raise ValueError("pc head needs at least 2 phoneme classes")
    c1, c2 = conv_channels
    plane = window * acoustic_dim
    proj = make_dense(rng, f"{name}.proj", cond_dim, plane, activation="none")
    conv1 = make_conv(rng, f"{name}.conv1", 2, c1)
    bn1 = make_batchnorm(f"{name}.bn1", c1, eps=bn_eps, momentum=bn_momentum)
    conv2 = make_conv(rng, f"{name}.conv2", c1, c2)
    bn2 = make_batchnorm(f"{name}.bn2", c2, eps=bn_eps, momentum=bn_momentum)
    fc = make_dense(rng, f"{name}.fc", c2 * plane + cond_dim, fc_width, activation="lrelu")
    head_units = 1 if head_kind == "binary" else classes
    head = make_dense(rng, f"{name}.head", fc_width, head_units, activation="none")
    return Discriminator(window, cond_dim, acoustic_dim, head_kind,
                         proj, conv1, bn1, conv2, bn2, fc, head)


# ---------------------------------------------------------------------------
# forward passes


def generator_apply(tape: Tape, g: Generator, z3: Tensor | None, y3: Tensor) -> Tensor:
    """Batched forward: noise [B, T, noise_dim] (or None), conditions [B, T, cond]."""
    if len(y3.shape) != 3 or y3.shape[2] != g.cond_dim:
        raise ShapeError(f"generator: conditions {y3.shape} do not match cond_dim {g.cond_dim}")
    B, T, _ = y3.shape
    if g.noise_dim == 0:
        if z3 is not None:
            raise ShapeError("generator: built without a noise input, but noise was given")
        h3 = y3
    else:
        if z3 is None:
            raise ShapeError("generator: noise input required")
        if z3.shape != (B, T, g.noise_dim):
            raise ShapeError(f"generator: noise {z3.shape} does not match ({B},{T},{g.noise_dim})")
        h3 = tape.concat([z3, y3], axis=2)

    y_flat = tape.reshape(y3, (B * T, g.cond_dim))
    h = tape.reshape(h3, (B * T, h3.shape[2]))
    for layer in g.dense:
        h = dense_forward(tape, layer, h)
        h = tape.concat([h, y_flat], axis=1)
    width = h.shape[1]
    h3 = tape.reshape(h, (B, T, width))
    for rec in g.recurrent:
        h3 = bilstm_apply(tape, rec, h3)
        h3 = tape.concat([h3, y3], axis=2)
    h = tape.reshape(h3, (B * T, h3.shape[2]))
    out = dense_forward(tape, g.out, h)
    return tape.reshape(out, (B, T, g.out_dim))


def generator_forward(tape: Tape, g: Generator, z: Tensor | None, y: Tensor) -> Tensor:
    """Single-sequence forward: [T, noise_dim] x [T, cond] -> [T, out_dim]."""
    if len(y.shape) != 2:
        raise ShapeError(f"generator: expects conditions [T, cond], got {y.shape}")
    T = y.shape[0]
    y3 = tape.reshape(y, (1, T, y.shape[1]))
    z3 = None if z is None else tape.reshape(z, (1, T, z.shape[1]))
    out = generator_apply(tape, g, z3, y3)
    return tape.reshape(out, (T, g.out_dim))


def discriminator_forward(tape: Tape, d: Discriminator, x_win: Tensor, y: Tensor,
                          mode: str = "train", update_running: bool = True) -> Tensor:
    """Score acoustic windows [B, W, A] under conditions [B, cond].

    Returns [B, 1] probabilities for the binary head, or [B, P] class
    probabilities (softmax rows) for the pc head.
    """
    if len(x_win.shape) != 3 or x_win.shape[1] != d.window or x_win.shape[2] != d.acoustic_dim:
        raise ShapeError(
            f"discriminator: windows {x_win.shape} do not match [B, {d.window}, {d.acoustic_dim}]")
    B = x_win.shape[0]
    if y.shape != (B, d.cond_dim):
        raise ShapeError(f"discriminator: conditions {y.shape} do not match ({B}, {d.cond_dim})")

    img = tape.reshape(x_win, (B, 1, d.window, d.acoustic_dim))
    plane = dense_forward(tape, d.proj, y)
    plane = tape.reshape(plane, (B, 1, d.window, d.acoustic_dim))
    h = tape.concat([img, plane], axis=1)
    h = conv_block_forward(tape, d.conv1, d.bn1, h, mode=mode,
                           lrelu_alpha=d.lrelu_alpha, update_running=update_running)
    h = conv_block_forward(tape, d.conv2, d.bn2, h, mode=mode,
                           lrelu_alpha=d.lrelu_alpha, update_running=update_running)
    flat_dim = d.conv2.out_channels * d.window * d.acoustic_dim
    h = tape.reshape(h, (B, flat_dim))
    h = tape.concat([h, y], axis=1)
    h = dense_forward(tape, d.fc, h)
    logits = dense_forward(tape, d.head, h)
    if d.head_kind == "binary":
        return tape.sigmoid(logits)
    return tape.softmax(logits, axis=1)
