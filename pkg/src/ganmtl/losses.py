"""Training objectives: reconstruction, adversarial, and phoneme-class losses.

Probabilities entering any log are clamped to [eps, 1-eps] on the tape, so
every loss stays finite for all inputs and each log term is bounded by
|log eps| in magnitude.  Losses are built from tape ops and therefore
differentiable end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import DomainError, ShapeError, Tape, Tensor

RECON_NORMS = ("l2", "l1")
G_ADV_FORMS = ("saturating", "non-saturating")


@dataclass
class LossConfig:
    """Weights and forms for the multi-task objective.

    adv_weight scales the adversarial term added to the reconstruction loss
    (0 disables it exactly).  g_adv_form picks the generator's adversarial
    term: "saturating" uses mean log(1 - D(fake)) as written in the minimax
    objective; "non-saturating" uses -mean log D(fake), which keeps early
    gradients alive when the discriminator wins.
    """

    adv_weight: float = 1.0
    recon_norm: str = "l2"
    g_adv_form: str = "saturating"
    prob_clamp: float = 1e-7

    def __post_init__(self):
        if self.adv_weight < 0:
            raise ValueError(f"adv_weight must be >= 0, got {self.adv_weight}")
        if self.recon_norm not in RECON_NORMS:
            raise ValueError(f"recon_norm must be one of {RECON_NORMS}, got {self.recon_norm!r}")
        if self.g_adv_form not in G_ADV_FORMS:
            raise ValueError(f"g_adv_form must be one of {G_ADV_FORMS}, got {self.g_adv_form!r}")
        if not 0.0 < self.prob_clamp < 0.5:
            raise ValueError(f"prob_clamp must lie in (0, 0.5), got {self.prob_clamp}")


def _check_same_shape(kind: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{kind}: shapes {a.shape} and {b.shape} differ")


def _check_probabilities(kind: str, t: Tensor) -> None:
    if np.any(t.data < 0.0) or np.any(t.data > 1.0):
        raise DomainError(f"{kind}: probabilities outside [0, 1] before clamping")


def _check_prob_rows(kind: str, p: Tensor) -> None:
    if len(p.shape) != 2:
        raise ShapeError(f"{kind}: expects [batch, classes], got {p.shape}")
    _check_probabilities(kind, p)
    sums = p.data.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise DomainError(f"{kind}: probability rows are not normalized")


def _check_labels(kind: str, labels: Tensor, classes: int) -> None:
    if len(labels.shape) != 2 or labels.shape[1] != classes:
        raise ShapeError(f"{kind}: labels {labels.shape} do not match {classes} classes")
    data = labels.data
    if np.any((data != 0.0) & (data != 1.0)) or np.any(data.sum(axis=1) != 1.0):
        raise DomainError(f"{kind}: labels must be one-hot rows")


def loss_mse(tape: Tape, x_model: Tensor, x_real: Tensor, norm: str = "l2") -> Tensor:
    """Mean squared (or absolute, for "l1") difference over all elements."""
    _check_same_shape("reconstruction loss", x_model, x_real)
    diff = tape.sub(x_model, x_real)
    if norm == "l2":
        return tape.mean(tape.square(diff))
    if norm == "l1":
        return tape.mean(tape.abs(diff))
    raise ValueError(f"unknown reconstruction norm {norm!r}")


def _clamped(tape: Tape, p: Tensor, eps: float) -> Tensor:
    return tape.clamp(p, eps, 1.0 - eps)


def loss_discriminator(tape: Tape, d_real: Tensor, d_fake: Tensor, cfg: LossConfig) -> Tensor:
    """Binary critic loss: -mean log D(real) - mean log(1 - D(fake))."""
    _check_probabilities("discriminator loss", d_real)
    _check_probabilities("discriminator loss", d_fake)
    eps = cfg.prob_clamp
    real_term = tape.mean(tape.log(_clamped(tape, d_real, eps)))
    fake_term = tape.mean(tape.log(_clamped(tape, tape.sub(Tensor(1.0), d_fake), eps)))
    return tape.sub(Tensor(0.0), tape.add(real_term, fake_term))


def adversarial_term(tape: Tape, d_fake: Tensor, cfg: LossConfig) -> Tensor:
    """The generator's adversarial component (see LossConfig.g_adv_form)."""
    _check_probabilities("adversarial term", d_fake)
    eps = cfg.prob_clamp
    if cfg.g_adv_form == "saturating":
        return tape.mean(tape.log(_clamped(tape, tape.sub(Tensor(1.0), d_fake), eps)))
    return tape.sub(Tensor(0.0), tape.mean(tape.log(_clamped(tape, d_fake, eps))))


def loss_generator_mtl(tape: Tape, x_model: Tensor, x_real: Tensor, d_fake: Tensor,
                       cfg: LossConfig) -> Tensor:
    """Multi-task generator loss: reconstruction + adv_weight * adversarial.

    With adv_weight == 0 the adversarial branch is not built at all, so the
    result reduces to loss_mse exactly (bit for bit).
    """
    recon = loss_mse(tape, x_model, x_real, cfg.recon_norm)
    if cfg.adv_weight == 0.0:
        return recon
    adv = adversarial_term(tape, d_fake, cfg)
    return tape.add(recon, tape.mul(Tensor(cfg.adv_weight), adv))


def cross_entropy_mean(tape: Tape, p: Tensor, labels: Tensor, eps: float) -> Tensor:
    """Mean over the batch of -sum(label * log clamp(p)) per row."""
    picked = tape.mul(labels, tape.log(_clamped(tape, p, eps)))
    return tape.sub(Tensor(0.0), tape.mean(tape.sum(picked, axis=1)))


def loss_pc_discriminator(tape: Tape, p_real: Tensor, p_fake: Tensor, labels: Tensor,
                          cfg: LossConfig) -> Tensor:
    """Phoneme-classification critic: mean CE(real) - mean CE(fake).

    Minimizing drives correct classification of natural windows and
    misclassification (high CE) of generated ones.
    """
    _check_prob_rows("pc discriminator loss", p_real)
    _check_prob_rows("pc discriminator loss", p_fake)
    _check_same_shape("pc discriminator loss", p_real, p_fake)
    _check_labels("pc discriminator loss", labels, p_real.shape[1])
    eps = cfg.prob_clamp
    ce_real = cross_entropy_mean(tape, p_real, labels, eps)
    ce_fake = cross_entropy_mean(tape, p_fake, labels, eps)
    return tape.sub(ce_real, ce_fake)


def loss_pc_generator(tape: Tape, x_model: Tensor, x_real: Tensor, p_fake: Tensor,
                      labels: Tensor, cfg: LossConfig) -> Tensor:
    """Multi-task generator loss for the pc mode: recon - adv_weight * CE(fake).

    The subtracted term rewards a high classifier cross-entropy on generated
    windows — the stated goal being that the phoneme of a fake should be
    unknowable — while the reconstruction term anchors the output to the
    target frames.  adv_weight == 0 reduces to loss_mse exactly.
    """
    recon = loss_mse(tape, x_model, x_real, cfg.recon_norm)
    if cfg.adv_weight == 0.0:
        return recon
    _check_prob_rows("pc generator loss", p_fake)
    _check_labels("pc generator loss", labels, p_fake.shape[1])
    ce_fake = cross_entropy_mean(tape, p_fake, labels, cfg.prob_clamp)
    return tape.sub(recon, tape.mul(Tensor(cfg.adv_weight), ce_fake))
