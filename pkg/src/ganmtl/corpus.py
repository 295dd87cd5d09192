"""Synthetic speech-parameter corpus with a closed-form ground truth.

Each utterance is a sequence of phoneme segments.  Every segment carries a
hidden mode s drawn from {-1, +1} that shifts its spectral frames away from
the phoneme mean — detail that is real structure in the data but invisible
to the linguistic features.  A mean-squared-error-optimal predictor must
therefore output the phoneme mean and lose the mode variance; how much of
that variance a trained model recovers is measurable against the closed-form
oracle below.

Frame layout
    linguistic  [T, L], L = P + 3:
        one-hot phoneme | position in phoneme | position in utterance | prosody flag
    acoustic    [T, A], A = M + 3:
        M spectral dims | band aperiodicity | log-F0 | voiced flag (0/1)

Generation rule per frame of a segment with phoneme p and mode s:
    spectral d: mu[p, d] + s * delta[p, d] + Normal(0, sigma^2)
    aperiodicity: mu[p, M] + Normal(0, sigma^2)
    log-F0: mu[p, M+1] + f0_sin_amp * sin(4 pi u)  if voiced else 0   (u = utterance position)
    voiced flag: voicing[p]
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .rng import Rng

SPLITS = ("train", "valid", "test")
SPLIT_FRACTIONS = (0.8, 0.1, 0.1)
LOG_F0_BASE = float(np.log(200.0))


@dataclass(frozen=True)
class CorpusConfig:
    phonemes: int = 8
    spectral_dims: int = 8
    utterances: int = 200
    segments_per_utterance: int = 12
    frames_per_phoneme: tuple[int, int] = (5, 10)
    sigma: float = 0.1
    delta_scale: float = 0.5
    f0_sin_amp: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.phonemes < 1:
            raise ValueError(f"phonemes must be >= 1, got {self.phonemes}")
        if self.spectral_dims < 1:
            raise ValueError(f"spectral_dims must be >= 1, got {self.spectral_dims}")
        if self.utterances < 10:
            raise ValueError(f"need at least 10 utterances for splits, got {self.utterances}")
        if self.segments_per_utterance < 1:
            raise ValueError("segments_per_utterance must be >= 1")
        lo, hi = self.frames_per_phoneme
        if not 1 <= lo <= hi:
            raise ValueError(f"bad frames_per_phoneme range {self.frames_per_phoneme}")
        if self.sigma < 0 or self.delta_scale < 0:
            raise ValueError("sigma and delta_scale must be nonnegative")

    @property
    def ling_dim(self) -> int:
        return self.phonemes + 3

    @property
    def acoustic_dim(self) -> int:
        return self.spectral_dims + 3


def degenerate_config(**overrides) -> CorpusConfig:
    """A noiseless, mode-free, flat-F0 corpus: frames equal the phoneme mean
    exactly, so a table lookup by phoneme achieves zero reconstruction error."""
    base = CorpusConfig(sigma=0.0, delta_scale=0.0, f0_sin_amp=0.0)
    return replace(base, **overrides)


@dataclass
class Utterance:
    ling: np.ndarray      # [T, L] float64
    acoustic: np.ndarray  # [T, A] float64
    labels: np.ndarray    # [T] int64 phoneme index per frame

    @property
    def frames(self) -> int:
        return self.ling.shape[0]


@dataclass
class GroundTruth:
    """The generative tables; everything an oracle needs, nothing a model sees."""

    mu: np.ndarray       # [P, A] per-phoneme means (all acoustic dims)
    delta: np.ndarray    # [P, M] hidden-mode offsets (spectral dims only)
    voicing: np.ndarray  # [P] 0/1
    sigma: float


@dataclass
class Dataset:
    utterances: list[Utterance]
    config: CorpusConfig
    split_of: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.split_of:
            self.split_of = assign_splits(len(self.utterances))

    def indices(self, split: str) -> list[int]:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}, expected one of {SPLITS}")
        return [i for i, s in enumerate(self.split_of) if s == split]


def assign_splits(count: int) -> list[str]:
    """Contiguous 80/10/10 assignment by utterance index."""
    n_train = int(count * SPLIT_FRACTIONS[0])
    n_valid = int(count * SPLIT_FRACTIONS[1])
    tags = ["train"] * n_train + ["valid"] * n_valid
    tags += ["test"] * (count - len(tags))
    return tags


# ---------------------------------------------------------------------------
# generation


def _draw_tables(cfg: CorpusConfig, rng: Rng) -> GroundTruth:
    P, M, A = cfg.phonemes, cfg.spectral_dims, cfg.acoustic_dim
    r = rng.stream("tables")
    mu = np.zeros((P, A))
    mu[:, :M] = r.uniform((P, M), -0.8, 0.8)
    mu[:, M] = r.uniform((P,), -0.8, 0.8)          # aperiodicity mean
    voicing = (np.arange(P) % 4 != 3).astype(np.int64)  # phoneme 0 is always voiced
    mu[:, M + 1] = np.where(voicing == 1, LOG_F0_BASE + r.uniform((P,), -0.3, 0.3), 0.0)
    mu[:, M + 2] = voicing
    delta = cfg.delta_scale * r.uniform((P, M), 0.5, 1.5)
    return GroundTruth(mu=mu, delta=delta, voicing=voicing, sigma=cfg.sigma)


def _generate_utterance(cfg: CorpusConfig, gt: GroundTruth, rng: Rng) -> Utterance:
    P, M = cfg.phonemes, cfg.spectral_dims
    K = cfg.segments_per_utterance
    lo, hi = cfg.frames_per_phoneme
    phones = rng.integers(0, P, (K,))
    durs = rng.integers(lo, hi + 1, (K,))
    modes = rng.choice_sign((K,))
    T = int(durs.sum())

    ling = np.zeros((T, cfg.ling_dim))
    acoustic = np.zeros((T, cfg.acoustic_dim))
    labels = np.zeros(T, dtype=np.int64)
    noise = rng.normal((T, M + 1), std=cfg.sigma) if cfg.sigma > 0 else np.zeros((T, M + 1))

    t = 0
    for k in range(K):
        p, dur, s = int(phones[k]), int(durs[k]), float(modes[k])
        rows = slice(t, t + dur)
        pos_in_phone = (np.arange(dur) + 0.5) / dur
        pos_in_utt = (np.arange(t, t + dur) + 0.5) / T

        ling[rows, p] = 1.0
        ling[rows, P] = pos_in_phone
        ling[rows, P + 1] = pos_in_utt
        ling[rows, P + 2] = 1.0 if k == K - 1 else 0.0

        acoustic[rows, :M] = gt.mu[p, :M] + s * gt.delta[p] + noise[rows, :M]
        acoustic[rows, M] = gt.mu[p, M] + noise[rows, M]
        if gt.voicing[p]:
            acoustic[rows, M + 1] = gt.mu[p, M + 1] + cfg.f0_sin_amp * np.sin(4.0 * np.pi * pos_in_utt)
            acoustic[rows, M + 2] = 1.0
        labels[rows] = p
        t += dur
    return Utterance(ling=ling, acoustic=acoustic, labels=labels)


def generate_corpus(cfg: CorpusConfig) -> tuple[Dataset, GroundTruth]:
    """Deterministic: the same config (seed included) gives bit-identical data.

    Each utterance consumes its own child random stream, so corpus size can
    change without disturbing the utterances that remain.
    """
    root = Rng(cfg.seed)
    gt = _draw_tables(cfg, root)
    utts = [_generate_utterance(cfg, gt, root.stream(("utt", i)))
            for i in range(cfg.utterances)]
    return Dataset(utterances=utts, config=cfg), gt


# ---------------------------------------------------------------------------
# oracle


def natural_gv_oracle(gt: GroundTruth, marginal=None) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form global variance of natural frames vs the MSE-optimal predictor.

    Per acoustic dim: natural frames vary through the phoneme table, the
    hidden mode, and the frame noise, so
        gv_natural  = Var_p(mu) + E_p[delta^2] + sigma^2
    while the conditional-mean predictor outputs exactly mu[p], keeping only
        gv_condmean = Var_p(mu).
    Mode and noise terms apply to the dims that carry them (spectral dims;
    aperiodicity has noise but no mode).  The F0/voicing columns use the
    table term only, ignoring the deterministic intonation ripple and
    voicing zeros, so the spectral and aperiodicity entries are the
    oracle-grade ones.

    marginal: phoneme weight vector [P]; uniform when omitted.
    """
    P, A = gt.mu.shape
    M = gt.delta.shape[1]
    if marginal is None:
        marginal = np.full(P, 1.0 / P)
    marginal = np.asarray(marginal, dtype=float)
    if marginal.shape != (P,) or np.any(marginal < 0):
        raise ValueError(f"marginal must be a nonnegative vector of length {P}")
    total = marginal.sum()
    if total <= 0:
        raise ValueError("marginal must have positive mass")
    w = marginal / total

    mean_mu = w @ gt.mu
    var_mu = w @ np.square(gt.mu) - np.square(mean_mu)
    gv_condmean = var_mu.copy()
    gv_natural = var_mu.copy()
    gv_natural[:M] += w @ np.square(gt.delta) + gt.sigma ** 2
    gv_natural[M] += gt.sigma ** 2
    return gv_natural, gv_condmean


def expected_spectral_mse(gt: GroundTruth, marginal=None) -> float:
    """Mean squared error of the conditional-mean predictor on spectral dims,
    averaged over dims: mean_d(E_p[delta^2] + sigma^2).  No predictor that
    sees only linguistic features can do better, because the mode is
    independent of them."""
    P, M = gt.delta.shape
    if marginal is None:
        marginal = np.full(P, 1.0 / P)
    w = np.asarray(marginal, dtype=float)
    w = w / w.sum()
    return float(np.mean(w @ np.square(gt.delta)) + gt.sigma ** 2)


# ---------------------------------------------------------------------------
# windowing


def window_catalog(ds: Dataset, split: str, window: int) -> list[tuple[int, int]]:
    """All (utterance index, start frame) pairs for stride window//2 cuts."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    stride = max(window // 2, 1)
    out = []
    for i in ds.indices(split):
        T = ds.utterances[i].frames
        if T < window:
            raise ValueError(
                f"window {window} exceeds utterance {i} length {T}")
        count = (T - window) // stride + 1
        out.extend((i, k * stride) for k in range(count))
    return out


def batches(ds: Dataset, split: str, batch_size: int, window: int, rng: Rng):
    """One epoch of shuffled windows as (ling [B,W,L], acoustic [B,W,A], labels [B]).

    The window label is the center frame's phoneme.  A trailing remainder
    batch is kept unless it holds a single window (batch statistics need at
    least two).
    """
    if batch_size < 2:
        raise ValueError(f"batch_size must be >= 2, got {batch_size}")
    catalog = window_catalog(ds, split, window)
    order = rng.permutation(len(catalog))
    center = window // 2
    for lo in range(0, len(order), batch_size):
        chunk = order[lo:lo + batch_size]
        if len(chunk) < 2:
            continue
        ling = np.stack([ds.utterances[u].ling[s:s + window] for u, s in
                         (catalog[j] for j in chunk)])
        acoustic = np.stack([ds.utterances[u].acoustic[s:s + window] for u, s in
                             (catalog[j] for j in chunk)])
        labels = np.array([ds.utterances[u].labels[s + center] for u, s in
                           (catalog[j] for j in chunk)], dtype=np.int64)
        yield ling, acoustic, labels
