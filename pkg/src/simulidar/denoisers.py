"""Noise predictors pluggable into the sampler.

The internal convention is epsilon-prediction: predict(batch, t) receives a
(B, h, w, 2) float32 tensor of noisy images and returns the noise estimate
with the same shape. A score-style predictor can be wrapped with
ScoreToNoiseAdapter (score = -eps / sqrt(1 - alpha_bar_t)).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError
from .schedule import NoiseSchedule


@dataclass(frozen=True)
class DenoiserDescriptor:
    name: str
    expected_h: int
    expected_w: int
    channels: int = 2
    accepts_batch: bool = True
    concurrent_safe: bool = True

    def __post_init__(self):
        if self.expected_h < 1 or self.expected_w < 1 or self.channels < 1:
            raise ValueError("descriptor dimensions must be positive")


def oracle_denoise(x_t: np.ndarray, t: int, schedule: NoiseSchedule, target_x0: np.ndarray) -> np.ndarray:
    """Analytic noise estimate (x_t - sqrt(ab_t)*x0) / sqrt(1 - ab_t).

    Exact inverse of the forward process for a known target; feeding it to
    the reverse step with zero sampling noise drives the chain to x0.
    """
    ab = float(schedule.alpha_bar[t])
    if ab >= 1.0:
        raise ZeroDivisionError("alpha_bar == 1 at this step; noise coefficient is zero")
    x64 = np.asarray(x_t, dtype=np.float64)
    x0 = np.asarray(target_x0, dtype=np.float64)
    eps = (x64 - np.sqrt(ab) * x0) / np.sqrt(1.0 - ab)
    return eps.astype(np.asarray(x_t).dtype, copy=False)


def zero_denoise(x_t: np.ndarray, t: int) -> np.ndarray:
    """All-zero prediction of matching shape (plumbing baseline)."""
    return np.zeros_like(x_t)


class OracleDenoiser:
    """Per-view analytic denoiser built from known target images.

    targets: (h, w, 2) broadcast to every batch entry, or (B, h, w, 2)
    aligned with the view order of the batch.
    """

    def __init__(self, schedule: NoiseSchedule, targets: np.ndarray):
        targets = np.asarray(targets, dtype=np.float32)
        if targets.ndim == 3:
            targets = targets[None]
        if targets.ndim != 4 or targets.shape[-1] != 2:
            raise DataFormatError("targets must be (h, w, 2) or (B, h, w, 2)")
        self.schedule = schedule
        self.targets = targets
        self.descriptor = DenoiserDescriptor(
            name="oracle", expected_h=targets.shape[1], expected_w=targets.shape[2]
        )

    def predict(self, batch: np.ndarray, t: int) -> np.ndarray:
        tgt = self.targets
        if len(tgt) == 1 and len(batch) > 1:
            tgt = np.broadcast_to(tgt, batch.shape)
        if tgt.shape != batch.shape:
            raise DataFormatError(f"batch shape {batch.shape} does not match targets {tgt.shape}")
        return oracle_denoise(batch, t, self.schedule, tgt)


class ZeroDenoiser:
    def __init__(self, h: int, w: int):
        self.descriptor = DenoiserDescriptor(name="zero", expected_h=h, expected_w=w)

    def predict(self, batch: np.ndarray, t: int) -> np.ndarray:
        return zero_denoise(batch, t)


class ScoreToNoiseAdapter:
    """Wraps a score predictor into the epsilon convention."""

    def __init__(self, score_fn, schedule: NoiseSchedule, descriptor: DenoiserDescriptor):
        self.score_fn = score_fn
        self.schedule = schedule
        self.descriptor = descriptor

    def predict(self, batch: np.ndarray, t: int) -> np.ndarray:
        score = np.asarray(self.score_fn(batch, t))
        if score.shape != batch.shape:
            raise DataFormatError(f"score shape {score.shape} != batch {batch.shape}")
        coeff = np.sqrt(1.0 - self.schedule.alpha_bar[t])
        return (-coeff * score).astype(batch.dtype, copy=False)


def write_oracle_sidecar(path, schedule: NoiseSchedule, target_x0: np.ndarray) -> None:
    """Persist an oracle target + schedule as JSON for external predictors.

    Floats round-trip exactly through JSON shortest-repr, so a remote
    implementation reading this file can reproduce oracle_denoise bit for
    bit on float32 payloads.
    """
    tgt = np.asarray(target_x0, dtype=np.float32)
    if tgt.ndim != 3 or tgt.shape[-1] != 2:
        raise DataFormatError("target must be (h, w, 2)")
    doc = {
        "h": int(tgt.shape[0]),
        "w": int(tgt.shape[1]),
        "channels": 2,
        "alpha_bar": [float(v) for v in schedule.alpha_bar],
        "x0": [float(v) for v in tgt.reshape(-1)],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)
