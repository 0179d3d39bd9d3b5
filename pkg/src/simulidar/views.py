"""Synthetic viewpoint placement and scan recasting.

A ViewSet holds world-from-view poses with index 0 reserved for the real
scanner. Recasting re-expresses the input scan's points relative to each
synthetic origin, producing the partial conditions used during sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GeometryError
from .geometry import (
    PointCloud,
    RigidTransform,
    compose,
    relative_transform,
    rotation_z,
    transform_cloud,
    translation,
)


@dataclass(frozen=True)
class ViewSet:
    """Ordered world-from-view poses; view 0 is the input scan's pose."""

    poses: tuple
    labels: tuple

    def __post_init__(self):
        poses = tuple(self.poses)
        labels = tuple(self.labels)
        if len(poses) < 1:
            raise GeometryError("a ViewSet needs at least the input view")
        if len(labels) != len(poses):
            raise GeometryError("one label per pose required")
        object.__setattr__(self, "poses", poses)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_poses(cls, poses: Sequence[RigidTransform], labels: Sequence[str] | None = None) -> "ViewSet":
        if labels is None:
            labels = [f"view{k}" for k in range(len(poses))]
        return cls(tuple(poses), tuple(labels))

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def synthetic_count(self) -> int:
        return len(self.poses) - 1


def recast(cloud: PointCloud, views: ViewSet) -> list[PointCloud]:
    """Re-express the frame-0 scan in every view's frame; remissions unchanged."""
    out = [cloud]
    for k in range(1, len(views)):
        to_k = relative_transform(views.poses[k], views.poses[0])
        out.append(transform_cloud(to_k, cloud, frame_id=views.labels[k]))
    return out


def place_views_circle(
    center_pose: RigidTransform,
    radius: float,
    count: int,
    label_prefix: str = "circle",
) -> ViewSet:
    """Synthetic views evenly spaced on a circle in the sensor's horizontal plane.

    Orientation of every view equals the center pose; the first synthetic
    view sits at local azimuth 0, i.e. offset (radius, 0).
    """
    if radius <= 0:
        raise GeometryError("radius must be positive")
    if count < 1:
        raise GeometryError("count must be >= 1")
    poses = [center_pose]
    labels = ["input"]
    for i in range(count):
        ang = 2.0 * math.pi * i / count
        local = translation(radius * math.cos(ang), radius * math.sin(ang), 0.0)
        poses.append(compose(center_pose, local))
        labels.append(f"{label_prefix}:{radius:g}m:{i}")
    return ViewSet(tuple(poses), tuple(labels))


def concat_view_sets(first: ViewSet, *rest: ViewSet) -> ViewSet:
    """Merge view sets sharing the same input view (pose 0 kept once)."""
    poses = list(first.poses)
    labels = list(first.labels)
    for vs in rest:
        poses.extend(vs.poses[1:])
        labels.extend(vs.labels[1:])
    return ViewSet(tuple(poses), tuple(labels))


def place_views_trajectory(
    poses_by_frame: Sequence[RigidTransform],
    start_frame: int,
    stride: int,
    count: int,
) -> ViewSet:
    """View k at poses_by_frame[start_frame + k*stride], k = 0..count."""
    if count < 0:
        raise GeometryError("count must be >= 0")
    indices = [start_frame + k * stride for k in range(count + 1)]
    if any(i < 0 or i >= len(poses_by_frame) for i in indices):
        raise GeometryError("trajectory placement exceeds the available poses")
    poses = [poses_by_frame[i] for i in indices]
    labels = ["input"] + [f"frame{i}" for i in indices[1:]]
    return ViewSet(tuple(poses), tuple(labels))


def fit_road_line(
    cloud: PointCloud,
    ground_band: tuple[float, float] = (-2.2, -1.2),
    min_points: int = 50,
):
    """Least-squares 2-D road line from ground-band points.

    Returns (point_on_line, direction): the foot of the sensor origin on the
    fitted line and a unit direction normalized to point into the forward
    (+x) half-plane.
    """
    z = cloud.points[:, 2]
    ground = cloud.points[(z >= ground_band[0]) & (z <= ground_band[1])]
    if len(ground) < min_points:
        raise GeometryError(f"only {len(ground)} ground points, need >= {min_points}")
    xy = ground[:, :2]
    centroid = xy.mean(axis=0)
    _, s, vt = np.linalg.svd(xy - centroid, full_matrices=False)
    if s[0] < 1e-9:
        raise GeometryError("ground points have no horizontal extent")
    if s[1] / s[0] > 0.95:
        raise GeometryError("ground points have no dominant direction")
    direction = vt[0]
    if direction[0] < 0 or (direction[0] == 0 and direction[1] < 0):
        direction = -direction
    foot = centroid + np.dot(-centroid, direction) * direction
    return foot, direction


def place_views_road(
    cloud: PointCloud,
    offsets: Sequence[float],
    center_pose: RigidTransform | None = None,
    align_to_road: bool = True,
    ground_band: tuple[float, float] = (-2.2, -1.2),
    min_points: int = 50,
) -> ViewSet:
    """Synthetic views at signed arc-offsets along the estimated road line.

    The line is fit to ground-band points of the input scan; views sit in
    the sensor's horizontal plane, oriented along the road direction unless
    align_to_road is false (then they keep the input orientation).
    """
    if center_pose is None:
        center_pose = RigidTransform.identity()
    poses = [center_pose]
    labels = ["input"]
    if len(tuple(offsets)) == 0:
        return ViewSet(tuple(poses), tuple(labels))
    foot, direction = fit_road_line(cloud, ground_band, min_points)
    yaw = math.atan2(direction[1], direction[0])
    for off in offsets:
        pos = foot + off * direction
        local = translation(pos[0], pos[1], 0.0)
        if align_to_road:
            local = compose(local, rotation_z(yaw))
        poses.append(compose(center_pose, local))
        labels.append(f"road:{off:+g}m")
    return ViewSet(tuple(poses), tuple(labels))
