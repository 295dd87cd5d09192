"""Objective evaluation: spectral distortion, F0 error, voicing error, variance.

All functions take plain float arrays.  Acoustic matrices follow the corpus
layout [spectral M | aperiodicity | log-F0 | voiced flag]; the helpers here
slice that layout via the dataset config.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Dataset
from .tensor import ShapeError

MCD_SCALE = 10.0 / np.log(10.0)


class EmptySupportError(ValueError):
    """A metric's support set (e.g. commonly-voiced frames) is empty."""


def mcd(ref_mcc: np.ndarray, hyp_mcc: np.ndarray) -> float:
    """Mel-cepstral distortion in dB, dim 0 (energy-like) excluded.

    Per frame: (10/ln 10) * sqrt(2 * sum_{d>=1} (ref_d - hyp_d)^2), then the
    frame values are averaged.
    """
    ref_mcc = np.asarray(ref_mcc, dtype=float)
    hyp_mcc = np.asarray(hyp_mcc, dtype=float)
    if ref_mcc.shape != hyp_mcc.shape or ref_mcc.ndim != 2:
        raise ShapeError(f"mcd: shapes {ref_mcc.shape} and {hyp_mcc.shape} must be equal [T, M]")
    if ref_mcc.shape[0] == 0:
        raise ShapeError("mcd: no frames")
    sq = np.square(ref_mcc[:, 1:] - hyp_mcc[:, 1:]).sum(axis=1)
    return float(np.mean(MCD_SCALE * np.sqrt(2.0 * sq)))


def f0_rmse(ref_logf0: np.ndarray, ref_vuv: np.ndarray,
            hyp_logf0: np.ndarray, hyp_vuv: np.ndarray) -> tuple[float, int]:
    """RMSE between exp(log-F0) values in Hz over commonly-voiced frames.

    A frame counts as voiced when its flag is >= 0.5 in both streams.
    Returns (rmse_hz, number of frames evaluated); raises EmptySupportError
    when no frame is voiced in both.
    """
    ref_logf0, hyp_logf0 = np.asarray(ref_logf0, float), np.asarray(hyp_logf0, float)
    ref_vuv, hyp_vuv = np.asarray(ref_vuv, float), np.asarray(hyp_vuv, float)
    if not ref_logf0.shape == ref_vuv.shape == hyp_logf0.shape == hyp_vuv.shape:
        raise ShapeError("f0_rmse: stream lengths differ")
    both = (ref_vuv >= 0.5) & (hyp_vuv >= 0.5)
    n = int(both.sum())
    if n == 0:
        raise EmptySupportError("f0_rmse: no commonly-voiced frames")
    diff = np.exp(ref_logf0[both]) - np.exp(hyp_logf0[both])
    return float(np.sqrt(np.mean(np.square(diff)))), n


def vuv_error_rate(ref_vuv: np.ndarray, hyp_vuv: np.ndarray) -> float:
    """Percent of frames whose voicing flags (threshold 0.5) disagree."""
    ref_vuv, hyp_vuv = np.asarray(ref_vuv, float), np.asarray(hyp_vuv, float)
    if ref_vuv.shape != hyp_vuv.shape:
        raise ShapeError("vuv_error_rate: stream lengths differ")
    if ref_vuv.size == 0:
        raise ShapeError("vuv_error_rate: no frames")
    return float(100.0 * np.mean((ref_vuv >= 0.5) != (hyp_vuv >= 0.5)))


def global_variance(utterances: list[np.ndarray]) -> np.ndarray:
    """Population variance per coefficient within each utterance, averaged."""
    if not utterances:
        raise ShapeError("global_variance: no utterances")
    acc = None
    for i, utt in enumerate(utterances):
        utt = np.asarray(utt, dtype=float)
        if utt.ndim != 2 or utt.shape[0] < 2:
            raise ShapeError(f"global_variance: utterance {i} needs at least 2 frames")
        v = utt.var(axis=0)
        acc = v if acc is None else acc + v
    return acc / len(utterances)


def gv_distance(gv_ref: np.ndarray, gv_hyp: np.ndarray) -> np.ndarray:
    """Elementwise |gv_ref - gv_hyp| per coefficient."""
    gv_ref, gv_hyp = np.asarray(gv_ref, float), np.asarray(gv_hyp, float)
    if gv_ref.shape != gv_hyp.shape:
        raise ShapeError(f"gv_distance: lengths {gv_ref.shape} and {gv_hyp.shape} differ")
    return np.abs(gv_ref - gv_hyp)


@dataclass
class MetricsReport:
    mcd_db: float
    f0_rmse_hz: float
    vuv_error_pct: float
    gv_ref: np.ndarray
    gv_hyp: np.ndarray
    gv_distance: np.ndarray
    frames_evaluated: int
    voiced_frames_evaluated: int

    def scalars(self) -> dict[str, float]:
        return {
            "mcd_db": self.mcd_db,
            "f0_rmse_hz": self.f0_rmse_hz,
            "vuv_error_pct": self.vuv_error_pct,
            "gv_distance_mean": float(np.mean(self.gv_distance)),
            "frames_evaluated": self.frames_evaluated,
            "voiced_frames_evaluated": self.voiced_frames_evaluated,
        }


def evaluate(ds: Dataset, split: str, hyp_frames: list[np.ndarray]) -> MetricsReport:
    """Aggregate all metrics for a split against model output.

    hyp_frames holds one [T, A] matrix per utterance of the split, in
    ``ds.indices(split)`` order.  Frame counts must match the references
    exactly (frames are aligned by construction — there is no warping).
    MCD/F0/voicing pool frames across the whole split; GV is computed per
    utterance on the spectral dims and averaged.
    """
    idx = ds.indices(split)
    if len(hyp_frames) != len(idx):
        raise ShapeError(
            f"evaluate: {len(hyp_frames)} hypothesis utterances for {len(idx)} references")
    M = ds.config.spectral_dims
    A = ds.config.acoustic_dim

    ref_mats, hyp_mats = [], []
    for k, i in enumerate(idx):
        ref = ds.utterances[i].acoustic
        hyp = np.asarray(hyp_frames[k], dtype=float)
        if hyp.shape != ref.shape:
            raise ShapeError(
                f"evaluate: utterance {i} hypothesis is {hyp.shape}, reference is {ref.shape}"
                if hyp.ndim == 2 else
                f"evaluate: utterance {i} hypothesis must be [T, {A}], got {hyp.shape}")
        ref_mats.append(ref)
        hyp_mats.append(hyp)

    ref_all = np.concatenate(ref_mats, axis=0)
    hyp_all = np.concatenate(hyp_mats, axis=0)
    mcd_db = mcd(ref_all[:, :M], hyp_all[:, :M])
    rmse_hz, voiced_n = f0_rmse(ref_all[:, M + 1], ref_all[:, M + 2],
                                hyp_all[:, M + 1], hyp_all[:, M + 2])
    vuv_pct = vuv_error_rate(ref_all[:, M + 2], hyp_all[:, M + 2])
    gv_r = global_variance([m[:, :M] for m in ref_mats])
    gv_h = global_variance([m[:, :M] for m in hyp_mats])
    return MetricsReport(
        mcd_db=mcd_db,
        f0_rmse_hz=rmse_hz,
        vuv_error_pct=vuv_pct,
        gv_ref=gv_r,
        gv_hyp=gv_h,
        gv_distance=gv_distance(gv_r, gv_h),
        frames_evaluated=int(ref_all.shape[0]),
        voiced_frames_evaluated=voiced_n,
    )
