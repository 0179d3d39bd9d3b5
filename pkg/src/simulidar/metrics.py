"""Quantitative evaluation of generated scans.

Range-image errors are reported in metric units (meters of depth, raw
0-255 remission); point-set quality uses accuracy/completeness against a
reference world set at a distance threshold, summarized by their harmonic
mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DataFormatError
from .geometry import WorldPointSet
from .projection import RangeImage, SensorModel


@dataclass(frozen=True)
class MetricReport:
    depth_mae: float
    remission_mae: float
    valid_pixel_count: int
    coverage_fraction: float

    def __post_init__(self):
        if self.depth_mae < 0 or self.remission_mae < 0 or self.valid_pixel_count < 0:
            raise DataFormatError("metric values must be non-negative")
        if not (0.0 <= self.coverage_fraction <= 1.0):
            raise DataFormatError("coverage_fraction must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "depth_mae": self.depth_mae,
            "remission_mae": self.remission_mae,
            "valid_pixel_count": self.valid_pixel_count,
            "coverage_fraction": self.coverage_fraction,
        }


@dataclass(frozen=True)
class CompletionScore:
    accuracy: float
    completeness: float
    f1: float
    tau: float

    def __post_init__(self):
        for v in (self.accuracy, self.completeness, self.f1):
            if not (0.0 <= v <= 100.0):
                raise DataFormatError("scores must lie in [0, 100]")

    @classmethod
    def from_parts(cls, accuracy: float, completeness: float, tau: float) -> "CompletionScore":
        return cls(accuracy, completeness, harmonic_f1(accuracy, completeness), tau)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "completeness": self.completeness,
            "f1": self.f1,
            "tau": self.tau,
        }


def harmonic_f1(accuracy: float, completeness: float) -> float:
    if accuracy + completeness == 0:
        return 0.0
    return 2.0 * accuracy * completeness / (accuracy + completeness)


def mae(pred: RangeImage, gt: RangeImage, sensor: SensorModel, region: np.ndarray | None = None) -> MetricReport:
    """Mean absolute depth (meters) and remission (0-255) error.

    Averages over pixels valid in both images, optionally restricted to a
    boolean region; coverage is measured against the ground truth's valid
    pixels within the same region.
    """
    if pred.shape != gt.shape:
        raise DataFormatError(f"image shapes differ: {pred.shape} vs {gt.shape}")
    both = pred.valid & gt.valid
    gt_valid = gt.valid
    if region is not None:
        region = np.asarray(region, dtype=bool)
        if region.shape != gt.shape:
            raise DataFormatError("region mask shape mismatch")
        both = both & region
        gt_valid = gt_valid & region
    n = int(both.sum())
    if n == 0:
        raise DataFormatError("no overlapping valid pixels to compare")
    depth_err = np.abs(
        sensor.denormalize_depth(pred.depth[both]) - sensor.denormalize_depth(gt.depth[both])
    )
    rem_err = np.abs(
        pred.remission[both].astype(np.float64) - gt.remission[both].astype(np.float64)
    ) * 255.0
    coverage = n / int(gt_valid.sum()) if gt_valid.any() else 0.0
    return MetricReport(float(depth_err.mean()), float(rem_err.mean()), n, float(coverage))


def completion_score(pred: WorldPointSet, gt: WorldPointSet, tau: float) -> CompletionScore:
    """Accuracy/completeness/F1 of generated points against a reference set.

    accuracy: share of predicted points with a reference point within tau;
    completeness: share of reference points with a predicted point within
    tau. Nearest neighbors are exact (KD-tree).
    """
    if len(pred) == 0 or len(gt) == 0:
        raise DataFormatError("completion scoring needs non-empty point sets")
    if tau <= 0:
        raise DataFormatError("tau must be positive")
    gt_tree = cKDTree(gt.points)
    pred_tree = cKDTree(pred.points)
    d_pred, _ = gt_tree.query(pred.points, k=1)
    d_gt, _ = pred_tree.query(gt.points, k=1)
    accuracy = 100.0 * float(np.mean(d_pred <= tau))
    completeness = 100.0 * float(np.mean(d_gt <= tau))
    return CompletionScore.from_parts(accuracy, completeness, tau)


def recast_stats(recast_img: RangeImage, gt_img: RangeImage, sensor: SensorModel) -> MetricReport:
    """Recasting quality: coverage is valid-recast over valid-ground-truth pixels."""
    if recast_img.shape != gt_img.shape:
        raise DataFormatError(f"image shapes differ: {recast_img.shape} vs {gt_img.shape}")
    report = mae(recast_img, gt_img, sensor)
    n_gt = int(gt_img.valid.sum())
    coverage = int(recast_img.valid.sum()) / n_gt if n_gt else 0.0
    return MetricReport(report.depth_mae, report.remission_mae, report.valid_pixel_count, float(min(coverage, 1.0)))


@dataclass(frozen=True)
class SemanticIoUReport:
    per_class: dict
    mean_iou: float

    def to_dict(self) -> dict:
        return {"mean_iou": self.mean_iou,
                "per_class": {int(k): v for k, v in sorted(self.per_class.items())}}


def semantic_iou(pred_labels: np.ndarray, gt_labels: np.ndarray,
                 valid: np.ndarray | None = None,
                 ignore_label: int | None = None) -> SemanticIoUReport:
    """Intersection-over-union of externally supplied per-pixel label maps.

    Scored over the classes present in either map (minus ignore_label),
    restricted to `valid` pixels when given. Only the arithmetic lives
    here; producing the labels is the caller's concern.
    """
    pred = np.asarray(pred_labels)
    gt = np.asarray(gt_labels)
    if pred.shape != gt.shape:
        raise DataFormatError(f"label shapes differ: {pred.shape} vs {gt.shape}")
    if valid is not None:
        valid = np.asarray(valid, dtype=bool)
        if valid.shape != gt.shape:
            raise DataFormatError("valid mask shape mismatch")
        pred, gt = pred[valid], gt[valid]
    if pred.size == 0:
        raise DataFormatError("no pixels to score")
    classes = np.union1d(np.unique(pred), np.unique(gt))
    if ignore_label is not None:
        classes = classes[classes != ignore_label]
    if classes.size == 0:
        raise DataFormatError("no classes left to score")
    per_class = {}
    for c in classes:
        p, g = pred == c, gt == c
        union = int(np.count_nonzero(p | g))
        per_class[int(c)] = float(np.count_nonzero(p & g) / union) if union else 0.0
    return SemanticIoUReport(per_class, float(np.mean(list(per_class.values()))))


def report_kv_lines(report, prefix: str = "") -> list[str]:
    """Stable key=value serialization of a report dataclass."""
    lines = []
    for key, value in report.to_dict().items():
        name = f"{prefix}{key}"
        if isinstance(value, float):
            lines.append(f"{name}={value:.6f}")
        else:
            lines.append(f"{name}={value}")
    return lines
