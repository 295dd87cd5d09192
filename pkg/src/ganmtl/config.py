"""Experiment configuration: the TrainConfig type and the key=value file format.

Config files are flat ``section.key=value`` text; blank lines and ``#``
comments are ignored.  Sections: ``corpus.*`` (dataset generation),
``model.*`` (architecture), ``loss.*``, ``adam.*``, ``train.*`` (loop
control).  Every key is optional — omitted keys keep their defaults — and
unknown keys are rejected rather than ignored, so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .corpus import CorpusConfig
from .losses import LossConfig
from .optim import AdamConfig

MODES = ("mse", "gan", "gan-pc", "asv")
ADVERSARIAL_MODES = ("gan", "gan-pc", "asv")
NOISE_MODES = ("gan", "gan-pc")


class ConfigError(ValueError):
    """Raised for unparseable, unknown, or invalid configuration input."""


@dataclass(frozen=True)
class TrainConfig:
    """Everything one training run depends on besides the dataset bytes."""

    mode: str = "gan"
    steps: int = 5000
    batch_size: int = 16
    d_steps_per_g_step: int = 1
    eval_every: int = 200
    seed: int = 0
    pure_adversarial: bool = False
    noise_dim: int = 16
    window: int = 9
    dense_widths: tuple[int, ...] = (64, 64, 64)
    rec_hidden: int = 32
    rec_layers: int = 2
    conv_channels: tuple[int, int] = (8, 16)
    fc_width: int = 64
    loss: LossConfig = field(default_factory=LossConfig)
    adam: AdamConfig = field(default_factory=AdamConfig)
    data: str | None = None
    out: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.d_steps_per_g_step < 0:
            raise ConfigError("d_steps_per_g_step must be >= 0")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")
        if self.window < 3:
            raise ConfigError(f"window must be >= 3, got {self.window}")
        if self.mode in NOISE_MODES and self.noise_dim < 1:
            raise ConfigError(f"mode {self.mode} needs noise_dim >= 1")
        if self.pure_adversarial and self.mode not in ADVERSARIAL_MODES:
            raise ConfigError("pure_adversarial requires an adversarial mode")
        if not self.dense_widths or any(w < 1 for w in self.dense_widths):
            raise ConfigError(f"bad dense_widths {self.dense_widths}")
        if self.rec_hidden < 1 or self.rec_layers < 0:
            raise ConfigError("bad recurrent stack shape")
        if len(self.conv_channels) != 2 or any(c < 1 for c in self.conv_channels):
            raise ConfigError(f"conv_channels must be two positive ints, got {self.conv_channels}")
        if self.fc_width < 1:
            raise ConfigError("fc_width must be >= 1")

    @property
    def effective_noise_dim(self) -> int:
        """Noise width actually fed to the generator (0 in noise-free modes)."""
        return self.noise_dim if self.mode in NOISE_MODES else 0

    @property
    def uses_discriminator(self) -> bool:
        return self.mode in ADVERSARIAL_MODES


# ---------------------------------------------------------------------------
# file parsing


def parse_kv_lines(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno} is not key=value: {raw!r}")
        if key in out:
            raise ConfigError(f"duplicate key {key!r} (line {lineno})")
        out[key] = value
    return out


def _to_int(key, v):
    try:
        return int(v)
    except ValueError:
        raise ConfigError(f"{key} expects an integer, got {v!r}") from None


def _to_float(key, v):
    try:
        return float(v)
    except ValueError:
        raise ConfigError(f"{key} expects a number, got {v!r}") from None


def _to_bool(key, v):
    lowered = v.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key} expects true/false, got {v!r}")


def _to_int_tuple(key, v):
    try:
        return tuple(int(part) for part in v.split(","))
    except ValueError:
        raise ConfigError(f"{key} expects comma-separated integers, got {v!r}") from None


_CORPUS_KEYS = {
    "phonemes": _to_int,
    "spectral_dims": _to_int,
    "utterances": _to_int,
    "segments_per_utterance": _to_int,
    "frames_per_phoneme": _to_int_tuple,
    "sigma": _to_float,
    "delta_scale": _to_float,
    "f0_sin_amp": _to_float,
    "seed": _to_int,
}

_MODEL_KEYS = {
    "noise_dim": _to_int,
    "window": _to_int,
    "dense_widths": _to_int_tuple,
    "rec_hidden": _to_int,
    "rec_layers": _to_int,
    "conv_channels": _to_int_tuple,
    "fc_width": _to_int,
}

_LOSS_KEYS = {
    "adv_weight": _to_float,
    "recon_norm": lambda k, v: v,
    "g_adv_form": lambda k, v: v,
    "prob_clamp": _to_float,
}

_ADAM_KEYS = {
    "lr": _to_float,
    "beta1": _to_float,
    "beta2": _to_float,
    "eps": _to_float,
}

_TRAIN_KEYS = {
    "mode": lambda k, v: v,
    "steps": _to_int,
    "batch_size": _to_int,
    "d_steps_per_g_step": _to_int,
    "eval_every": _to_int,
    "seed": _to_int,
    "pure_adversarial": _to_bool,
}

_SECTIONS = {
    "corpus": _CORPUS_KEYS,
    "model": _MODEL_KEYS,
    "loss": _LOSS_KEYS,
    "adam": _ADAM_KEYS,
    "train": _TRAIN_KEYS,
}


def _split_sections(flat: dict[str, str]) -> dict[str, dict]:
    """Validate section.key names and convert values to their declared types."""
    out: dict[str, dict] = {name: {} for name in _SECTIONS}
    bad = []
    for key, value in flat.items():
        section, sep, sub = key.partition(".")
        if not sep or section not in _SECTIONS or sub not in _SECTIONS[section]:
            bad.append(key)
            continue
        out[section][sub] = _SECTIONS[section][sub](key, value)
    if bad:
        raise ConfigError(f"unknown config keys: {sorted(bad)}")
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    corpus: CorpusConfig
    train: TrainConfig


def experiment_from_text(text: str) -> ExperimentConfig:
    sections = _split_sections(parse_kv_lines(text))
    try:
        corpus = CorpusConfig(**sections["corpus"])
    except ValueError as e:
        raise ConfigError(f"corpus config: {e}") from None
    loss_kwargs = sections["loss"]
    adam_kwargs = sections["adam"]
    try:
        loss = LossConfig(**loss_kwargs)
        adam = AdamConfig(**adam_kwargs)
        train = TrainConfig(loss=loss, adam=adam, **sections["model"], **sections["train"])
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return ExperimentConfig(corpus=corpus, train=train)


def load_experiment(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as f:
        return experiment_from_text(f.read())


def with_paths(cfg: TrainConfig, data=None, out=None) -> TrainConfig:
    return replace(cfg, data=str(data) if data else cfg.data,
                   out=str(out) if out else cfg.out)


# compact listing of every accepted key, for error messages and docs
def known_keys() -> list[str]:
    return sorted(f"{sec}.{key}" for sec, keys in _SECTIONS.items() for key in keys)
