"""Training loop for the four acoustic-model variants, plus synthesis.

Modes:

* ``mse``    — generator alone on linguistic windows, squared-error loss.
* ``gan``    — generator fed [noise; conditions], binary critic, multi-task
  generator loss (reconstruction + weighted adversarial term).
* ``gan-pc`` — same loop with the phoneme-classification critic and its
  cross-entropy losses.
* ``asv``    — generator fed conditions only (no noise), binary critic,
  multi-task generator loss.

Every step draws one shared real batch.  Critic sub-steps run first (each
with freshly drawn noise, generator output detached); then one generator
update runs through the critic without touching its running statistics.
All randomness flows from the run seed through named substreams, so a
(config, seed) pair fixes every artifact byte; wall-clock time is therefore
logged as zero and real timing only ever goes to stderr.

Training aborts on any non-finite loss, gradient, or update by raising
TrainingDivergedError; the most recent periodic checkpoint stays on disk.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, save_checkpoint
from .config import TrainConfig
from .corpus import Dataset, batches
from .dataio import read_dataset
from .losses import (LossConfig, adversarial_term, cross_entropy_mean,
                     loss_discriminator, loss_generator_mtl, loss_mse,
                     loss_pc_discriminator, loss_pc_generator)
from .metrics import EmptySupportError, evaluate
from .models import (NoiseSpec, build_discriminator, build_generator,
                     discriminator_forward, generator_apply, generator_forward)
from .optim import AdamState, adam_step
from .rng import Rng
from .tensor import GradientError, ShapeError, Tape, Tensor, backward, zero_grads

TRAIN_COLUMNS = ("step", "mse", "adv", "d_loss", "wall_ms")
D_COLUMNS = ("step", "real_term", "fake_term")
VAL_COLUMNS = ("step", "mcd_db", "f0_rmse_hz", "vuv_error_pct", "gv_distance_mean")

CHECKPOINT_NAME = "checkpoint.gmtl"
TRAIN_LOG_NAME = "train_log.csv"
D_LOG_NAME = "d_log.csv"
VAL_LOG_NAME = "val_log.csv"


class TrainingDivergedError(RuntimeError):
    """A loss, gradient, or parameter update turned non-finite.

    Carries the failing step number and the log rows gathered so far.
    """

    def __init__(self, message: str, step: int, log: "TrainLog"):
        super().__init__(message)
        self.step = step
        self.log = log


@dataclass
class TrainLog:
    """In-memory mirror of the three CSV logs (see the *_COLUMNS tuples)."""

    rows: list[dict] = field(default_factory=list)
    d_rows: list[dict] = field(default_factory=list)
    val_rows: list[dict] = field(default_factory=list)


def _fmt_cell(value) -> str:
    # repr of a builtin float round-trips exactly; numpy scalars are coerced
    # so their verbose repr never leaks into a CSV cell
    return repr(float(value)) if isinstance(value, float) else str(value)


class _CsvSink:
    """One CSV log file: header, append-per-row, resume-aware trimming.

    Rows whose leading step column exceeds ``keep_through`` are dropped on
    open, so a restart from a checkpoint discards records the interrupted
    run wrote past its last snapshot.
    """

    def __init__(self, path, columns, keep_through: int):
        self.columns = columns
        header = ",".join(columns) + "\n"
        kept = []
        path = Path(path)
        if path.exists():
            with open(path, "r", encoding="utf-8") as f:
                lines = f.readlines()
            if lines and lines[0] == header:
                for line in lines[1:]:
                    try:
                        step = int(line.split(",", 1)[0])
                    except ValueError:
                        continue
                    if step <= keep_through:
                        kept.append(line)
        self._f = open(path, "w", encoding="utf-8")
        self._f.write(header)
        self._f.writelines(kept)
        self._f.flush()

    def write(self, row: dict) -> None:
        self._f.write(",".join(_fmt_cell(row[c]) for c in self.columns) + "\n")
        self._f.flush()

    def close(self) -> None:
        self._f.close()


# ---------------------------------------------------------------------------
# logged loss components (plain numpy mirrors of the on-tape losses)


def _log_mean(p: np.ndarray, eps: float) -> float:
    """Mean log of p clamped to [eps, 1-eps]."""
    return float(np.mean(np.log(np.clip(p, eps, 1.0 - eps))))


def _ce_mean(p: np.ndarray, onehot: np.ndarray, eps: float) -> float:
    logp = np.log(np.clip(p, eps, 1.0 - eps))
    return float(-np.mean(np.sum(onehot * logp, axis=1)))


def _adv_value(d_fake: np.ndarray, cfg: LossConfig) -> float:
    if cfg.g_adv_form == "saturating":
        return _log_mean(1.0 - d_fake, cfg.prob_clamp)
    return -_log_mean(d_fake, cfg.prob_clamp)


# ---------------------------------------------------------------------------
# training


def _check_resumable(ck: Checkpoint, cfg: TrainConfig, ling_dim: int,
                     acoustic_dim: int, classes: int) -> None:
    saved = replace(ck.cfg, steps=cfg.steps, data=cfg.data, out=cfg.out)
    if saved != cfg:
        raise ValueError(
            "resume config does not match the checkpoint (only steps and "
            "the data/output paths may change between runs)")
    if (ck.ling_dim, ck.acoustic_dim, ck.classes) != (ling_dim, acoustic_dim, classes):
        raise ValueError(
            f"checkpoint dims (ling={ck.ling_dim}, acoustic={ck.acoustic_dim}, "
            f"classes={ck.classes}) do not match the dataset "
            f"({ling_dim}, {acoustic_dim}, {classes})")


def _validation_row(ds: Dataset, generator, cfg: TrainConfig, root: Rng,
                    step: int) -> dict:
    hyp = []
    for i in ds.indices("valid"):
        utt = ds.utterances[i]
        rng = root.stream(("val", step, i))
        z = None
        if cfg.effective_noise_dim:
            z = Tensor(NoiseSpec(cfg.noise_dim).sample(rng, utt.frames))
        out = generator_forward(Tape(), generator, z, Tensor(utt.ling))
        hyp.append(out.data)
    row = {"step": step}
    try:
        scalars = evaluate(ds, "valid", hyp).scalars()
        for key in VAL_COLUMNS[1:]:
            row[key] = scalars[key]
    except EmptySupportError:
        for key in VAL_COLUMNS[1:]:
            row[key] = float("nan")
    return row


def train(cfg: TrainConfig, dataset: Dataset | None = None,
          resume_from: Checkpoint | None = None,
          verbose: bool = False) -> tuple[Checkpoint, TrainLog]:
    """Run (or continue) one training run; returns the final state and log.

    The dataset comes from ``cfg.data`` unless passed directly.  With
    ``cfg.out`` set, the three CSV logs and a rolling checkpoint land
    there; otherwise everything stays in memory.  ``resume_from`` continues
    a checkpointed run bit-identically to never having stopped; if its step
    count already meets cfg.steps the call is a no-op returning an empty log.
    """
    if dataset is None:
        if not cfg.data:
            raise ValueError("no dataset: cfg.data is unset and none was passed")
        dataset = read_dataset(cfg.data)
    ling_dim = dataset.config.ling_dim
    acoustic_dim = dataset.config.acoustic_dim
    classes = dataset.config.phonemes if cfg.mode == "gan-pc" else 0

    root = Rng(cfg.seed)
    if resume_from is None:
        generator = build_generator(
            root.stream("init_g"), noise_dim=cfg.effective_noise_dim,
            cond_dim=ling_dim, out_dim=acoustic_dim,
            dense_widths=cfg.dense_widths, rec_hidden=cfg.rec_hidden,
            rec_layers=cfg.rec_layers, name="g")
        discriminator = None
        adam_d = None
        if cfg.uses_discriminator:
            discriminator = build_discriminator(
                root.stream("init_d"), window=cfg.window, cond_dim=ling_dim,
                acoustic_dim=acoustic_dim,
                head_kind="pc" if cfg.mode == "gan-pc" else "binary",
                classes=classes, conv_channels=cfg.conv_channels,
                fc_width=cfg.fc_width, name="d")
            adam_d = AdamState(config=cfg.adam)
        adam_g = AdamState(config=cfg.adam)
        noise_rng = root.stream("noise")
        step = epoch = batch_pos = 0
    else:
        _check_resumable(resume_from, cfg, ling_dim, acoustic_dim, classes)
        generator = resume_from.generator
        discriminator = resume_from.discriminator
        adam_g = resume_from.adam_g
        adam_d = resume_from.adam_d
        noise_rng = resume_from.noise_rng()
        step = resume_from.step
        epoch = resume_from.epoch
        batch_pos = resume_from.batch_pos

    log = TrainLog()
    if step >= cfg.steps:
        return resume_from, log

    def snapshot() -> Checkpoint:
        return Checkpoint(
            cfg=cfg, ling_dim=ling_dim, acoustic_dim=acoustic_dim,
            classes=classes, step=step, epoch=epoch, batch_pos=batch_pos,
            generator=generator, discriminator=discriminator,
            adam_g=adam_g, adam_d=adam_d, noise_state=noise_rng.state())

    def epoch_batches(e: int):
        return batches(dataset, "train", cfg.batch_size, cfg.window,
                       root.stream(("data", e)))

    batch_gen = epoch_batches(epoch)
    for _ in range(batch_pos):
        if next(batch_gen, None) is None:
            raise ValueError("checkpoint batch position exceeds the epoch; "
                             "was the dataset regenerated?")

    out_dir = Path(cfg.out) if cfg.out else None
    sinks: dict[str, _CsvSink] = {}
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        sinks["train"] = _CsvSink(out_dir / TRAIN_LOG_NAME, TRAIN_COLUMNS, step)
        sinks["val"] = _CsvSink(out_dir / VAL_LOG_NAME, VAL_COLUMNS, step)
        if cfg.uses_discriminator:
            sinks["d"] = _CsvSink(out_dir / D_LOG_NAME, D_COLUMNS, step)

    center = cfg.window // 2
    eps = cfg.loss.prob_clamp
    noise = NoiseSpec(cfg.noise_dim) if cfg.effective_noise_dim else None
    eye = np.eye(dataset.config.phonemes) if cfg.mode == "gan-pc" else None
    started = time.monotonic()
    first_step = step
    ckpt = None

    try:
        while step < cfg.steps:
            batch = next(batch_gen, None)
            if batch is None:
                epoch += 1
                batch_pos = 0
                batch_gen = epoch_batches(epoch)
                batch = next(batch_gen, None)
                if batch is None:
                    raise ValueError("training split yields no batches")
            batch_pos += 1
            step += 1
            ling_w, ac_w, labels = batch
            B = ling_w.shape[0]
            y_d = ling_w[:, center, :]
            onehot = eye[labels] if eye is not None else None

            try:
                # -- critic sub-steps (generator output detached) ---------
                d_loss_val = float("nan")
                d_row = None
                for _ in range(cfg.d_steps_per_g_step if discriminator is not None else 0):
                    z = None
                    if noise is not None:
                        z = Tensor(noise_rng.uniform((B, cfg.window, noise.dim),
                                                     noise.lo, noise.hi))
                    fake = generator_apply(Tape(), generator, z, Tensor(ling_w)).data
                    td = Tape()
                    d_real = discriminator_forward(td, discriminator, Tensor(ac_w),
                                                   Tensor(y_d))
                    d_fake = discriminator_forward(td, discriminator, Tensor(fake),
                                                   Tensor(y_d))
                    if onehot is not None:
                        d_loss = loss_pc_discriminator(td, d_real, d_fake,
                                                       Tensor(onehot), cfg.loss)
                        real_term = _ce_mean(d_real.data, onehot, eps)
                        fake_term = _ce_mean(d_fake.data, onehot, eps)
                        d_loss_val = real_term - fake_term
                    else:
                        d_loss = loss_discriminator(td, d_real, d_fake, cfg.loss)
                        real_term = -_log_mean(d_real.data, eps)
                        fake_term = -_log_mean(1.0 - d_fake.data, eps)
                        d_loss_val = real_term + fake_term
                    zero_grads(discriminator.params())
                    backward(td, d_loss)
                    adam_step(adam_d, discriminator.params())
                    d_row = {"step": step, "real_term": real_term,
                             "fake_term": fake_term}
                if d_row is not None:
                    log.d_rows.append(d_row)
                    if "d" in sinks:
                        sinks["d"].write(d_row)

                # -- generator step ---------------------------------------
                z = None
                if noise is not None:
                    z = Tensor(noise_rng.uniform((B, cfg.window, noise.dim),
                                                 noise.lo, noise.hi))
                tg = Tape()
                real = Tensor(ac_w)
                fake = generator_apply(tg, generator, z, Tensor(ling_w))
                adv_val = float("nan")
                if discriminator is None:
                    g_loss = loss_mse(tg, fake, real, cfg.loss.recon_norm)
                else:
                    d_out = discriminator_forward(tg, discriminator, fake,
                                                  Tensor(y_d), mode="train",
                                                  update_running=False)
                    if onehot is not None:
                        adv_val = -_ce_mean(d_out.data, onehot, eps)
                        if cfg.pure_adversarial:
                            ce = cross_entropy_mean(tg, d_out, Tensor(onehot), eps)
                            g_loss = tg.sub(Tensor(0.0), ce)
                        else:
                            g_loss = loss_pc_generator(tg, fake, real, d_out,
                                                       Tensor(onehot), cfg.loss)
                    else:
                        adv_val = _adv_value(d_out.data, cfg.loss)
                        if cfg.pure_adversarial:
                            g_loss = adversarial_term(tg, d_out, cfg.loss)
                        else:
                            g_loss = loss_generator_mtl(tg, fake, real, d_out,
                                                        cfg.loss)
                zero_grads(generator.params())
                backward(tg, g_loss)
                adam_step(adam_g, generator.params())
                mse_val = float(np.mean((fake.data - ac_w) ** 2))
            except GradientError as e:
                raise TrainingDivergedError(f"step {step}: {e}", step, log) from e

            row = {"step": step, "mse": mse_val, "adv": adv_val,
                   "d_loss": d_loss_val, "wall_ms": 0}
            log.rows.append(row)
            if "train" in sinks:
                sinks["train"].write(row)

            if step % cfg.eval_every == 0 or step == cfg.steps:
                if step % cfg.eval_every == 0:
                    val_row = _validation_row(dataset, generator, cfg, root, step)
                    log.val_rows.append(val_row)
                    if "val" in sinks:
                        sinks["val"].write(val_row)
                ckpt = snapshot()
                if out_dir is not None:
                    save_checkpoint(ckpt, out_dir / CHECKPOINT_NAME)
                if verbose:
                    ms = 1000.0 * (time.monotonic() - started) / (step - first_step)
                    print(f"[{cfg.mode}] step {step}/{cfg.steps} "
                          f"mse={mse_val:.5f} ({ms:.1f} ms/step)",
                          file=sys.stderr)
    finally:
        for sink in sinks.values():
            sink.close()
    return ckpt, log


# ---------------------------------------------------------------------------
# synthesis


def synthesize(ckpt: Checkpoint, ling: np.ndarray, seed,
               stride: int | None = None) -> np.ndarray:
    """Run the checkpointed generator over one linguistic sequence [T, L].

    Long sequences are rendered as overlapping training-length windows whose
    outputs are averaged per frame, so the recurrent stack never sees a
    context longer than it was trained on.  ``stride`` is the hop between
    window starts (default: half a window); a final window is always pinned
    to the sequence end so every frame is covered.  Sequences no longer than
    one window run in a single pass.

    ``seed`` is an integer (hashed into a fresh noise stream) or an Rng to
    draw from directly; noise-free modes ignore the draw entirely.  Noise is
    drawn once for the whole sequence ([T, noise_dim]) and sliced per window,
    so the result does not depend on how the windows tile.  Returns the
    acoustic frame matrix [T, A].
    """
    ling = np.asarray(ling, dtype=np.float64)
    if ling.ndim != 2 or ling.shape[1] != ckpt.ling_dim:
        raise ShapeError(f"synthesize: conditions {ling.shape} do not match "
                         f"[T, {ckpt.ling_dim}]")
    T = ling.shape[0]
    window = ckpt.cfg.window
    if stride is None:
        stride = max(1, window // 2)
    if stride < 1:
        raise ShapeError(f"synthesize: stride must be positive, got {stride}")
    z_all = None
    if ckpt.cfg.effective_noise_dim:
        rng = seed if isinstance(seed, Rng) else Rng(int(seed))
        z_all = NoiseSpec(ckpt.cfg.noise_dim).sample(rng, T)
    if T <= window:
        z = None if z_all is None else Tensor(z_all)
        return generator_forward(Tape(), ckpt.generator, z, Tensor(ling)).data
    acc = np.zeros((T, ckpt.generator.out_dim))
    hits = np.zeros((T, 1))
    for start in sorted(set(range(0, T - window + 1, stride)) | {T - window}):
        z = None if z_all is None else Tensor(z_all[start:start + window])
        out = generator_forward(Tape(), ckpt.generator, z,
                                Tensor(ling[start:start + window]))
        acc[start:start + window] += out.data
        hits[start:start + window] += 1.0
    return acc / hits
