"""Rigid-body algebra for scans and sensor poses.

Transforms are plain rotation-matrix + translation pairs (the convention of
KITTI-360 pose files). Point clouds keep a stable point order so that index
j identifies the same physical return before and after any transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import GeometryError

ORTHONORMAL_TOL = 1e-9


class Point3(NamedTuple):
    """A single 3D position in meters."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=np.float64)


def _as_rotation(m, tol: float) -> np.ndarray:
    r = np.asarray(m, dtype=np.float64)
    if r.shape != (3, 3):
        raise GeometryError(f"rotation must be 3x3, got {r.shape}")
    err = np.abs(r.T @ r - np.eye(3)).max()
    if err > tol:
        raise GeometryError(f"rotation not orthonormal (deviation {err:.3e} > {tol:.1e})")
    if np.linalg.det(r) < 0:
        raise GeometryError("rotation has determinant -1 (reflection)")
    return r


class RigidTransform:
    """SE(3) pose: p_out = rotation @ p_in + translation."""

    __slots__ = ("rotation", "translation")

    def __init__(self, rotation, translation, *, tol: float = ORTHONORMAL_TOL, check: bool = True):
        if check:
            rotation = _as_rotation(rotation, tol)
        else:
            rotation = np.asarray(rotation, dtype=np.float64)
        translation = np.asarray(translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(rotation)) or not np.all(np.isfinite(translation)):
            raise GeometryError("transform entries must be finite")
        rotation.setflags(write=False)
        translation.setflags(write=False)
        self.rotation = rotation
        self.translation = translation

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3), check=False)

    @classmethod
    def from_matrix(cls, m, *, tol: float = ORTHONORMAL_TOL) -> "RigidTransform":
        m = np.asarray(m, dtype=np.float64)
        if m.shape not in ((3, 4), (4, 4)):
            raise GeometryError(f"expected 3x4 or 4x4 matrix, got {m.shape}")
        return cls(m[:3, :3], m[:3, 3], tol=tol)

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (n, 3) array (or a single 3-vector) of points."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def __repr__(self) -> str:
        return f"RigidTransform(t={self.translation.tolist()})"


def rotation_z(angle_rad: float) -> RigidTransform:
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return RigidTransform([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]], np.zeros(3), check=False)


def translation(x: float, y: float, z: float) -> RigidTransform:
    return RigidTransform(np.eye(3), [x, y, z], check=False)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform applying b first, then a."""
    return RigidTransform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation, check=False)


def invert(t: RigidTransform) -> RigidTransform:
    rt = t.rotation.T
    return RigidTransform(rt, -(rt @ t.translation), check=False)


def relative_transform(world_from_a: RigidTransform, world_from_b: RigidTransform) -> RigidTransform:
    """Transform mapping b-frame coordinates into a-frame coordinates."""
    return compose(invert(world_from_a), world_from_b)


@dataclass(frozen=True)
class PointCloud:
    """Ordered 3D points with per-point remission, in a single sensor frame.

    points: (n, 3) float64 meters; remissions: (n,) float64 in [0, 255].
    """

    points: np.ndarray
    remissions: np.ndarray
    frame_id: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        rem = np.asarray(self.remissions, dtype=np.float64).reshape(-1)
        if len(pts) != len(rem):
            raise GeometryError(f"{len(pts)} points but {len(rem)} remissions")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("point coordinates must be finite")
        if len(rem) and (rem.min() < 0.0 or rem.max() > 255.0):
            raise GeometryError("remission values must lie in [0, 255]")
        pts.setflags(write=False)
        rem.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "remissions", rem)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class WorldPointSet:
    """World-frame points merged from one or more views.

    source_view[i] is the index of the view that produced point i.
    """

    points: np.ndarray
    remissions: np.ndarray
    source_view: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        rem = np.asarray(self.remissions, dtype=np.float64).reshape(-1)
        src = self.source_view
        if src is None:
            src = np.zeros(len(pts), dtype=np.int64)
        src = np.asarray(src, dtype=np.int64).reshape(-1)
        if not (len(pts) == len(rem) == len(src)):
            raise GeometryError("points, remissions and source_view lengths differ")
        for a in (pts, rem, src):
            a.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "remissions", rem)
        object.__setattr__(self, "source_view", src)

    def __len__(self) -> int:
        return len(self.points)

    def from_view(self, k: int) -> "WorldPointSet":
        sel = self.source_view == k
        return WorldPointSet(self.points[sel], self.remissions[sel], self.source_view[sel])


def transform_cloud(t: RigidTransform, cloud: PointCloud, frame_id: str | None = None) -> PointCloud:
    """Apply a rigid transform to every point; remissions and order unchanged."""
    return PointCloud(
        t.apply(cloud.points),
        cloud.remissions,
        frame_id=cloud.frame_id if frame_id is None else frame_id,
    )


def merge_to_world(clouds: Sequence[PointCloud], poses: Sequence[RigidTransform]) -> WorldPointSet:
    """Move each cloud into the world frame via its pose and concatenate them."""
    if len(clouds) != len(poses):
        raise GeometryError(f"{len(clouds)} clouds but {len(poses)} poses")
    parts, rems, srcs = [], [], []
    for k, (cloud, pose) in enumerate(zip(clouds, poses)):
        parts.append(pose.apply(cloud.points))
        rems.append(cloud.remissions)
        srcs.append(np.full(len(cloud), k, dtype=np.int64))
    if not parts:
        return WorldPointSet(np.empty((0, 3)), np.empty(0), np.empty(0, dtype=np.int64))
    return WorldPointSet(np.concatenate(parts), np.concatenate(rems), np.concatenate(srcs))
