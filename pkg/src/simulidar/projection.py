"""Equirectangular projection between point clouds and two-channel range images.

A scan is rasterized onto an h x w grid: column u from the azimuth
(two-argument arctangent of y, x), row v from the elevation against the
vertical field of view [fov_up, -fov_down]. Pixels store a log-normalized
depth and a remission scaled to [0, 1]; when several points land on one
pixel the nearest survives. Backprojection places one point per valid pixel
on the pixel-center ray.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from . import kernels
from .errors import DataFormatError, GeometryError
from .geometry import PointCloud

DENSIFY_METHODS = ("nearest", "bilinear", "bicubic")


@dataclass(frozen=True)
class SensorModel:
    """Scanner geometry, normalization and hardware-limit parameters.

    fov_down_deg is stored positive (a sensor looking 25 degrees below the
    horizon has fov_down_deg=25). alpha scales log2(d+1) so the deepest
    returns map to roughly 1.
    """

    h: int = 64
    w: int = 1024
    fov_up_deg: float = 3.0
    fov_down_deg: float = 25.0
    alpha: float = 6.0
    min_range: float = 1.0
    max_range: float = 80.0
    dead_pixel_mask: np.ndarray | None = None

    def __post_init__(self):
        if self.h < 1 or self.w < 1:
            raise GeometryError("image dimensions must be >= 1")
        if self.fov_deg <= 0:
            raise GeometryError("total vertical field of view must be positive")
        if self.alpha <= 0:
            raise GeometryError("alpha must be positive")
        if not (0 <= self.min_range < self.max_range):
            raise GeometryError("need 0 <= min_range < max_range")
        if self.dead_pixel_mask is not None:
            m = np.asarray(self.dead_pixel_mask, dtype=bool)
            if m.shape != (self.h, self.w):
                raise GeometryError(f"dead_pixel_mask shape {m.shape} != {(self.h, self.w)}")
            m.setflags(write=False)
            object.__setattr__(self, "dead_pixel_mask", m)

    @property
    def fov_deg(self) -> float:
        return self.fov_up_deg + self.fov_down_deg

    def dead_mask(self) -> np.ndarray:
        if self.dead_pixel_mask is None:
            return np.zeros((self.h, self.w), dtype=bool)
        return self.dead_pixel_mask

    def normalize_depth(self, d):
        """Metric depth -> image value: log2(d + 1) / alpha."""
        return np.log2(np.asarray(d, dtype=np.float64) + 1.0) / self.alpha

    def denormalize_depth(self, c):
        """Image value -> metric depth: 2^(alpha * c) - 1."""
        with np.errstate(over="ignore"):
            return np.exp2(self.alpha * np.asarray(c, dtype=np.float64)) - 1.0

    def in_range(self, d) -> np.ndarray:
        d = np.asarray(d)
        return (d >= self.min_range) & (d <= self.max_range)


@dataclass(frozen=True)
class RangeImage:
    """Normalized-depth + remission image with a per-pixel validity mask."""

    depth: np.ndarray
    remission: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        depth = np.ascontiguousarray(self.depth, dtype=np.float32)
        rem = np.ascontiguousarray(self.remission, dtype=np.float32)
        valid = np.ascontiguousarray(self.valid, dtype=bool)
        if not (depth.shape == rem.shape == valid.shape) or depth.ndim != 2:
            raise GeometryError("depth, remission and valid must share one 2-D shape")
        invalid = ~valid
        if np.any(depth[invalid] != 0) or np.any(rem[invalid] != 0):
            raise GeometryError("invalid pixels must hold zeros in both channels")
        if np.any(depth[valid] < 0):
            raise GeometryError("normalized depth must be >= 0")
        for a in (depth, rem, valid):
            a.setflags(write=False)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "remission", rem)
        object.__setattr__(self, "valid", valid)

    @classmethod
    def from_planes(cls, depth, remission, valid) -> "RangeImage":
        """Build an image, zeroing the channels wherever valid is false."""
        valid = np.asarray(valid, dtype=bool)
        depth = np.where(valid, np.asarray(depth, dtype=np.float32), np.float32(0))
        rem = np.where(valid, np.asarray(remission, dtype=np.float32), np.float32(0))
        return cls(depth, rem, valid)

    @classmethod
    def empty(cls, h: int, w: int) -> "RangeImage":
        z = np.zeros((h, w), dtype=np.float32)
        return cls(z, z.copy(), np.zeros((h, w), dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

    def channels(self) -> np.ndarray:
        """Stack as a writable (h, w, 2) float32 tensor (depth, remission)."""
        return np.stack([self.depth, self.remission], axis=-1)


# ---------------------------------------------------------------------------
# projection / backprojection
# ---------------------------------------------------------------------------

def pixel_coords(points: np.ndarray, sensor: SensorModel):
    """Per-point (u, v, d) under the equirectangular mapping.

    u = floor(0.5 * (1 - atan2(y, x)/pi) * w), wrapped modulo w;
    v = floor((1 - (fov_up - elevation_deg)/fov) * h), unclamped, so the
    sensor's physical band [-fov_down, fov_up) fills the rows and the
    horizon lands at row (fov_down/fov)*h.
    """
    pts = np.asarray(points, dtype=np.float64)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    d = np.sqrt(x * x + y * y + z * z)
    az = np.arctan2(y, x)
    ratio = np.clip(np.where(d > 0, z / np.maximum(d, 1e-300), 0.0), -1.0, 1.0)
    el_deg = np.degrees(np.arcsin(ratio))
    u = np.floor(0.5 * (1.0 - az / np.pi) * sensor.w).astype(np.int64) % sensor.w
    v = np.floor((1.0 - (sensor.fov_up_deg - el_deg) / sensor.fov_deg) * sensor.h).astype(np.int64)
    return u, v, d


def project_arrays(points: np.ndarray, remissions: np.ndarray, sensor: SensorModel, *, zbuffer: bool = True):
    """Rasterize raw arrays; returns (depth_norm32, rem32, valid, metric_depth64).

    Points outside the range limits, outside the vertical rows, or landing
    on dead pixels are dropped; per pixel the smallest metric depth wins.
    """
    u, v, d = pixel_coords(points, sensor)
    keep = sensor.in_range(d) & (v >= 0) & (v < sensor.h)
    u, v, d = u[keep], v[keep], d[keep]
    rem = np.asarray(remissions, dtype=np.float64)[keep]
    if sensor.dead_pixel_mask is not None:
        alive = ~sensor.dead_pixel_mask[v, u]
        u, v, d, rem = u[alive], v[alive], d[alive], rem[alive]

    pix = v * sensor.w + u
    n_pixels = sensor.h * sensor.w
    if zbuffer:
        winners = kernels.zbuffer_argmin(np.ascontiguousarray(pix), np.ascontiguousarray(d), n_pixels)
    else:
        winners = kernels.scatter_last(np.ascontiguousarray(pix), n_pixels)
    valid = (winners >= 0).reshape(sensor.h, sensor.w)

    depth_m = np.zeros(n_pixels, dtype=np.float64)
    depth32 = np.zeros(n_pixels, dtype=np.float32)
    rem32 = np.zeros(n_pixels, dtype=np.float32)
    hit = winners >= 0
    if hit.any():
        sel = winners[hit]
        depth_m[hit] = d[sel]
        depth32[hit] = (sensor.normalize_depth(d[sel])).astype(np.float32)
        rem32[hit] = (rem[sel] / 255.0).astype(np.float32)
    shape = (sensor.h, sensor.w)
    return depth32.reshape(shape), rem32.reshape(shape), valid, depth_m.reshape(shape)


def project(cloud: PointCloud, sensor: SensorModel) -> RangeImage:
    """Spherical projection of a scan to a two-channel range image."""
    depth32, rem32, valid, _ = project_arrays(cloud.points, cloud.remissions, sensor)
    return RangeImage(depth32, rem32, valid)


def ray_directions(sensor: SensorModel, vs: np.ndarray, us: np.ndarray) -> np.ndarray:
    """Unit rays through the centers of the given (v, u) pixels, (n, 3)."""
    az = (1.0 - 2.0 * (us.astype(np.float64) + 0.5) / sensor.w) * np.pi
    el_deg = sensor.fov_up_deg - (1.0 - (vs.astype(np.float64) + 0.5) / sensor.h) * sensor.fov_deg
    el = np.radians(el_deg)
    ce = np.cos(el)
    return np.stack([ce * np.cos(az), ce * np.sin(az), np.sin(el)], axis=-1)


def backproject_arrays(depth_chan: np.ndarray, rem_chan: np.ndarray, valid: np.ndarray, sensor: SensorModel):
    """Inverse projection on raw planes; returns (points64, remissions64).

    One point per valid pixel along the pixel-center ray at the
    denormalized depth; pixels outside scanner limits produce no point.
    """
    d = sensor.denormalize_depth(depth_chan)
    keep = valid & sensor.in_range(d)
    if sensor.dead_pixel_mask is not None:
        keep = keep & ~sensor.dead_pixel_mask
    vs, us = np.nonzero(keep)
    dirs = ray_directions(sensor, vs, us)
    pts = dirs * d[keep][:, None]
    rem = np.asarray(rem_chan, dtype=np.float64)[keep] * 255.0
    return pts, rem


def backproject(img: RangeImage, sensor: SensorModel, frame_id: str = "") -> PointCloud:
    """Inverse spherical projection of the valid pixels to a scan."""
    if img.shape != (sensor.h, sensor.w):
        raise GeometryError(f"image shape {img.shape} != sensor {(sensor.h, sensor.w)}")
    pts, rem = backproject_arrays(img.depth, img.remission, img.valid, sensor)
    return PointCloud(pts, np.clip(rem, 0.0, 255.0), frame_id=frame_id)


def apply_condition_mask(img: RangeImage, mask: np.ndarray) -> RangeImage:
    """Keep only pixels where mask is true; the rest become invalid zeros."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != img.shape:
        raise GeometryError(f"mask shape {mask.shape} != image {img.shape}")
    return RangeImage.from_planes(img.depth, img.remission, img.valid & mask)


def dead_mask_from_corpus(valid_stack: Sequence[np.ndarray] | np.ndarray, threshold: float = 0.01) -> np.ndarray:
    """Pixels valid in at most `threshold` of the given scans' masks."""
    stack = np.asarray(valid_stack, dtype=bool)
    if stack.ndim != 3 or len(stack) == 0:
        raise DataFormatError("need a non-empty (n, h, w) stack of validity masks")
    return stack.mean(axis=0) <= threshold


# ---------------------------------------------------------------------------
# classical densification baselines
# ---------------------------------------------------------------------------

def _fill_columns_nearest(values: np.ndarray, known: np.ndarray) -> np.ndarray:
    """Per column, replace unknown knot entries by the nearest known one."""
    out = values.copy()
    n_rows, n_cols = values.shape
    rows = np.arange(n_rows, dtype=np.float64)
    for c in range(n_cols):
        k = known[:, c]
        if not k.any() or k.all():
            continue
        src = np.nonzero(k)[0]
        nearest = src[np.argmin(np.abs(rows[:, None] - src[None, :]), axis=1)]
        out[~k, c] = values[nearest[~k], c]
    return out


def interpolate_densify(img: RangeImage, method: str, sensor: SensorModel) -> RangeImage:
    """Fill the missing beams of a row-subsampled image by interpolation.

    Interpolation runs per column over metric depth and raw remission, then
    renormalizes. Validity follows the method's source neighborhood: the
    nearest knot row (nearest), both bracketing knot rows (bilinear), or
    the four closest knot rows (bicubic).
    """
    if method not in DENSIFY_METHODS:
        raise ValueError(f"method must be one of {DENSIFY_METHODS}")
    rows = np.nonzero(img.valid.any(axis=1))[0]
    if len(rows) == 0:
        raise DataFormatError("no valid rows to interpolate from")

    h, w = img.shape
    depth_m = sensor.denormalize_depth(img.depth)
    rem_raw = np.asarray(img.remission, dtype=np.float64) * 255.0
    knot_depth = depth_m[rows]
    knot_rem = rem_raw[rows]
    knot_valid = img.valid[rows]
    knot_depth = _fill_columns_nearest(knot_depth, knot_valid)
    knot_rem = _fill_columns_nearest(knot_rem, knot_valid)
    col_has_data = knot_valid.any(axis=0)

    targets = np.arange(h, dtype=np.float64)
    clamped = np.clip(targets, rows[0], rows[-1])

    if method == "nearest":
        near = np.argmin(np.abs(targets[:, None] - rows[None, :]), axis=1)
        depth_out = knot_depth[near]
        rem_out = knot_rem[near]
        valid_out = knot_valid[near]
    elif method == "bilinear":
        hi = np.clip(np.searchsorted(rows, clamped, side="left"), 0, len(rows) - 1)
        lo = np.clip(hi - (rows[hi] > clamped), 0, len(rows) - 1)
        hi = np.maximum(hi, lo)
        span = np.where(rows[hi] > rows[lo], rows[hi] - rows[lo], 1).astype(np.float64)
        frac = ((clamped - rows[lo]) / span)[:, None]
        depth_out = knot_depth[lo] + frac * (knot_depth[hi] - knot_depth[lo])
        rem_out = knot_rem[lo] + frac * (knot_rem[hi] - knot_rem[lo])
        valid_out = knot_valid[lo] & knot_valid[hi]
    else:
        if len(rows) < 4:
            raise DataFormatError("bicubic needs at least 4 valid rows")
        depth_out = CubicSpline(rows, knot_depth, axis=0)(clamped)
        rem_out = CubicSpline(rows, knot_rem, axis=0)(clamped)
        near4 = np.argsort(np.abs(targets[:, None] - rows[None, :]), axis=1, kind="stable")[:, :4]
        valid_out = np.all(knot_valid[near4], axis=1)

    valid_out = valid_out & col_has_data[None, :]
    depth_out = np.clip(depth_out, 0.0, None)
    rem_out = np.clip(rem_out, 0.0, 255.0)
    return RangeImage.from_planes(
        sensor.normalize_depth(depth_out).astype(np.float32),
        (rem_out / 255.0).astype(np.float32),
        valid_out,
    )
