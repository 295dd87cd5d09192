"""Checkpoint file format (GMTL): full training state, bit-exact round trip.

Layout, all integers little-endian:

    magic   4 bytes  b"GMTL"
    version u32      format revision (currently 1)
    config  u32 length + UTF-8 "key=value" lines (run config + loop counters)
    count   u32      number of tensors
    per tensor:
        name   u32 length + UTF-8
        rank   u32, then one u32 per dimension
        data   float64, row-major
    crc32   u32      of every preceding byte

The config block carries everything scalar: the TrainConfig the run was
started with, the corpus-derived dimensions the networks were built for,
loop counters (step, epoch, position within the current epoch), Adam step
counts, and the noise-stream PRNG state.  Tensors carry the rest: model
parameters under their own names ("g.*", "d.*"), batch-norm running
statistics under "buf.", and Adam moments under "adam_g." / "adam_d.".

Loading rebuilds the architecture from the config (throwaway init) and then
overwrites every parameter by name, so a checkpoint is self-describing —
no external config file is needed to synthesize from it or to resume.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, TrainConfig, parse_kv_lines
from .dataio import FormatError, _Cursor
from .losses import LossConfig
from .models import Discriminator, Generator, build_discriminator, build_generator
from .optim import AdamConfig, AdamState
from .rng import Rng

MAGIC = b"GMTL"
VERSION = 1


@dataclass
class Checkpoint:
    """A resumable snapshot of one training run."""

    cfg: TrainConfig
    ling_dim: int
    acoustic_dim: int
    classes: int
    step: int
    epoch: int
    batch_pos: int
    generator: Generator
    discriminator: Discriminator | None
    adam_g: AdamState
    adam_d: AdamState | None
    noise_state: dict

    def noise_rng(self) -> Rng:
        return Rng.from_state(self.noise_state)


# ---------------------------------------------------------------------------
# config block


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def _config_text(ckpt: Checkpoint) -> str:
    cfg = ckpt.cfg
    pairs = [
        ("mode", cfg.mode),
        ("steps", cfg.steps),
        ("batch_size", cfg.batch_size),
        ("d_steps_per_g_step", cfg.d_steps_per_g_step),
        ("eval_every", cfg.eval_every),
        ("seed", cfg.seed),
        ("pure_adversarial", cfg.pure_adversarial),
        ("noise_dim", cfg.noise_dim),
        ("window", cfg.window),
        ("dense_widths", cfg.dense_widths),
        ("rec_hidden", cfg.rec_hidden),
        ("rec_layers", cfg.rec_layers),
        ("conv_channels", cfg.conv_channels),
        ("fc_width", cfg.fc_width),
        ("loss.adv_weight", cfg.loss.adv_weight),
        ("loss.recon_norm", cfg.loss.recon_norm),
        ("loss.g_adv_form", cfg.loss.g_adv_form),
        ("loss.prob_clamp", cfg.loss.prob_clamp),
        ("adam.lr", cfg.adam.lr),
        ("adam.beta1", cfg.adam.beta1),
        ("adam.beta2", cfg.adam.beta2),
        ("adam.eps", cfg.adam.eps),
        ("ling_dim", ckpt.ling_dim),
        ("acoustic_dim", ckpt.acoustic_dim),
        ("classes", ckpt.classes),
        ("step", ckpt.step),
        ("epoch", ckpt.epoch),
        ("batch_pos", ckpt.batch_pos),
        ("adam_g_t", ckpt.adam_g.t),
        ("adam_d_t", ckpt.adam_d.t if ckpt.adam_d is not None else 0),
        ("rng_noise", "{seed},{key},{counter}".format(**ckpt.noise_state)),
    ]
    return "".join(f"{k}={_fmt(v)}\n" for k, v in pairs)


def _parse_config(text: str) -> dict:
    try:
        fields = parse_kv_lines(text)
    except ConfigError as e:
        raise FormatError(f"checkpoint config block: {e}") from None

    def pop(key, conv):
        try:
            return conv(fields.pop(key))
        except KeyError:
            raise FormatError(f"checkpoint config is missing field {key!r}") from None
        except ValueError as e:
            raise FormatError(f"checkpoint config field {key!r} unparseable: {e}") from None

    int_tuple = lambda v: tuple(int(p) for p in v.split(","))

    def as_bool(v):
        if v not in ("true", "false"):
            raise ValueError(f"expected true/false, got {v!r}")
        return v == "true"
    try:
        loss = LossConfig(
            adv_weight=pop("loss.adv_weight", float),
            recon_norm=pop("loss.recon_norm", str),
            g_adv_form=pop("loss.g_adv_form", str),
            prob_clamp=pop("loss.prob_clamp", float),
        )
        adam = AdamConfig(
            lr=pop("adam.lr", float),
            beta1=pop("adam.beta1", float),
            beta2=pop("adam.beta2", float),
            eps=pop("adam.eps", float),
        )
        cfg = TrainConfig(
            mode=pop("mode", str),
            steps=pop("steps", int),
            batch_size=pop("batch_size", int),
            d_steps_per_g_step=pop("d_steps_per_g_step", int),
            eval_every=pop("eval_every", int),
            seed=pop("seed", int),
            pure_adversarial=pop("pure_adversarial", as_bool),
            noise_dim=pop("noise_dim", int),
            window=pop("window", int),
            dense_widths=pop("dense_widths", int_tuple),
            rec_hidden=pop("rec_hidden", int),
            rec_layers=pop("rec_layers", int),
            conv_channels=pop("conv_channels", int_tuple),
            fc_width=pop("fc_width", int),
            loss=loss,
            adam=adam,
        )
    except (ConfigError, ValueError, KeyError) as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(f"checkpoint config invalid: {e}") from None
    out = {
        "cfg": cfg,
        "ling_dim": pop("ling_dim", int),
        "acoustic_dim": pop("acoustic_dim", int),
        "classes": pop("classes", int),
        "step": pop("step", int),
        "epoch": pop("epoch", int),
        "batch_pos": pop("batch_pos", int),
        "adam_g_t": pop("adam_g_t", int),
        "adam_d_t": pop("adam_d_t", int),
    }
    seed, key, counter = pop("rng_noise", int_tuple)
    out["noise_state"] = {"seed": seed, "key": key, "counter": counter}
    if fields:
        raise FormatError(f"checkpoint config has unknown fields: {sorted(fields)}")
    return out


# ---------------------------------------------------------------------------
# tensor table


def _collect_tensors(ckpt: Checkpoint) -> list[tuple[str, np.ndarray]]:
    out = [(p.name, p.value.data) for p in ckpt.generator.params()]
    for name, m in sorted(ckpt.adam_g.m.items()):
        out.append((f"adam_g.m.{name}", m))
    for name, v in sorted(ckpt.adam_g.v.items()):
        out.append((f"adam_g.v.{name}", v))
    if ckpt.discriminator is not None:
        out += [(p.name, p.value.data) for p in ckpt.discriminator.params()]
        for name, buf in sorted(ckpt.discriminator.buffers().items()):
            out.append((f"buf.d.{name}", buf.data))
        for name, m in sorted(ckpt.adam_d.m.items()):
            out.append((f"adam_d.m.{name}", m))
        for name, v in sorted(ckpt.adam_d.v.items()):
            out.append((f"adam_d.v.{name}", v))
    return out


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    parts = [MAGIC, struct.pack("<I", VERSION)]
    cfg_bytes = _config_text(ckpt).encode("utf-8")
    parts.append(struct.pack("<I", len(cfg_bytes)))
    parts.append(cfg_bytes)
    tensors = _collect_tensors(ckpt)
    parts.append(struct.pack("<I", len(tensors)))
    for name, arr in tensors:
        name_bytes = name.encode("utf-8")
        parts.append(struct.pack("<I", len(name_bytes)))
        parts.append(name_bytes)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    body = b"".join(parts)
    with open(path, "wb") as f:
        f.write(body)
        f.write(struct.pack("<I", zlib.crc32(body)))


def _read_tensors(cur: _Cursor) -> dict[str, np.ndarray]:
    count = cur.u32("tensor count")
    out: dict[str, np.ndarray] = {}
    for i in range(count):
        what = f"tensor {i}"
        name_len = cur.u32(f"{what} name length")
        name = cur.take(name_len, f"{what} name").decode("utf-8")
        rank = cur.u32(f"{name} rank")
        if rank > 8:
            raise FormatError(f"tensor {name} has implausible rank {rank}")
        shape = tuple(cur.u32(f"{name} dims") for _ in range(rank))
        size = 1
        for d in shape:
            size *= d
        raw = cur.take(8 * size, f"{name} data")
        if name in out:
            raise FormatError(f"duplicate tensor {name}")
        out[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
    return out


def _assign_named(net_params, tensors: dict[str, np.ndarray], prefix: str) -> None:
    """Overwrite each parameter from tensors; the name sets must match exactly."""
    wanted = {p.name for p in net_params}
    present = {n for n in tensors if n.startswith(prefix)}
    if wanted != present:
        missing = sorted(wanted - present)
        extra = sorted(present - wanted)
        raise FormatError(f"checkpoint tensor names do not match the rebuilt model "
                          f"(missing {missing}, unexpected {extra})")
    for p in net_params:
        arr = tensors[p.name]
        if arr.shape != p.value.data.shape:
            raise FormatError(f"tensor {p.name} has shape {arr.shape}, "
                              f"model expects {p.value.data.shape}")
        p.value.data[...] = arr


def _adam_from(tensors: dict[str, np.ndarray], prefix: str, config: AdamConfig,
               t: int) -> AdamState:
    m = {name[len(prefix) + 3:]: arr.copy()
         for name, arr in tensors.items() if name.startswith(prefix + ".m.")}
    v = {name[len(prefix) + 3:]: arr.copy()
         for name, arr in tensors.items() if name.startswith(prefix + ".v.")}
    if set(m) != set(v):
        raise FormatError(f"{prefix} moment tables are inconsistent")
    return AdamState(config=config, t=t, m=m, v=v)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        raw = f.read()
    cur = _Cursor(raw)
    if cur.take(4, "magic") != MAGIC:
        raise FormatError("not a GMTL checkpoint (bad magic)")
    version = cur.u32("version")
    if version != VERSION:
        raise FormatError(f"unsupported GMTL version {version} (expected {VERSION})")
    cfg_len = cur.u32("config length")
    meta = _parse_config(cur.take(cfg_len, "config block").decode("utf-8"))
    tensors = _read_tensors(cur)
    stated = struct.unpack("<I", cur.take(4, "checksum"))[0]
    if cur.pos != len(raw):
        raise FormatError(f"{len(raw) - cur.pos} trailing bytes after checksum")
    if zlib.crc32(raw[:cur.pos - 4]) != stated:
        raise FormatError("checksum mismatch: file is corrupted")

    cfg: TrainConfig = meta["cfg"]
    init = Rng(0)  # throwaway — every value is overwritten below
    generator = build_generator(
        init.stream("init_g"), noise_dim=cfg.effective_noise_dim,
        cond_dim=meta["ling_dim"], out_dim=meta["acoustic_dim"],
        dense_widths=cfg.dense_widths, rec_hidden=cfg.rec_hidden,
        rec_layers=cfg.rec_layers, name="g")
    _assign_named(generator.params(), tensors, "g.")

    discriminator = None
    adam_d = None
    if cfg.uses_discriminator:
        head_kind = "pc" if cfg.mode == "gan-pc" else "binary"
        discriminator = build_discriminator(
            init.stream("init_d"), window=cfg.window, cond_dim=meta["ling_dim"],
            acoustic_dim=meta["acoustic_dim"], head_kind=head_kind,
            classes=meta["classes"], conv_channels=cfg.conv_channels,
            fc_width=cfg.fc_width, name="d")
        _assign_named(discriminator.params(), tensors, "d.")
        for name, buf in discriminator.buffers().items():
            key = f"buf.d.{name}"
            if key not in tensors:
                raise FormatError(f"checkpoint is missing buffer {key}")
            buf.data[...] = tensors[key]
        adam_d = _adam_from(tensors, "adam_d", cfg.adam, meta["adam_d_t"])

    adam_g = _adam_from(tensors, "adam_g", cfg.adam, meta["adam_g_t"])
    known = {p.name for p in generator.params()}
    known |= {f"adam_g.m.{n}" for n in adam_g.m} | {f"adam_g.v.{n}" for n in adam_g.v}
    if discriminator is not None:
        known |= {p.name for p in discriminator.params()}
        known |= {f"buf.d.{n}" for n in discriminator.buffers()}
        known |= {f"adam_d.m.{n}" for n in adam_d.m} | {f"adam_d.v.{n}" for n in adam_d.v}
    unknown = sorted(set(tensors) - known)
    if unknown:
        raise FormatError(f"checkpoint has unexpected tensors: {unknown}")

    return Checkpoint(
        cfg=cfg, ling_dim=meta["ling_dim"], acoustic_dim=meta["acoustic_dim"],
        classes=meta["classes"], step=meta["step"], epoch=meta["epoch"],
        batch_pos=meta["batch_pos"], generator=generator,
        discriminator=discriminator, adam_g=adam_g, adam_d=adam_d,
        noise_state=meta["noise_state"])
