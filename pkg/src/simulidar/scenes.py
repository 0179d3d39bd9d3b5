"""Deterministic synthetic scenes with an exact ray-cast renderer.

Scenes are unions of rectangular patches (boxes contribute six faces).
The renderer intersects pixel-center rays analytically, giving desk-scale
ground truth for any sensor pose without real data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError
from .geometry import PointCloud, RigidTransform, WorldPointSet
from .projection import RangeImage, SensorModel, backproject, ray_directions

SCENE_KINDS = ("room", "corridor", "occluders")

FLOOR_REMISSION = 40.0
CEILING_REMISSION = 60.0
WALL_REMISSION = 80.0
BOX_REMISSION = 150.0

SENSOR_HEIGHT = 1.7  # floor sits this far below the sensor origin


@dataclass(frozen=True)
class Rect:
    """Finite plane patch: origin + two spanning edge vectors."""

    origin: np.ndarray
    edge1: np.ndarray
    edge2: np.ndarray
    remission: float

    def __post_init__(self):
        for name in ("origin", "edge1", "edge2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))

    @property
    def area(self) -> float:
        return float(np.linalg.norm(np.cross(self.edge1, self.edge2)))

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        """Ray parameter of the hit for each unit direction, inf on miss."""
        n = np.cross(self.edge1, self.edge2)
        denom = dirs @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((self.origin - origin) @ n) / denom
        q = origin + t[:, None] * dirs - self.origin
        a = (q @ self.edge1) / (self.edge1 @ self.edge1)
        b = (q @ self.edge2) / (self.edge2 @ self.edge2)
        ok = (np.abs(denom) > 1e-12) & (t > 1e-9) & (a >= 0) & (a <= 1) & (b >= 0) & (b <= 1)
        return np.where(ok, t, np.inf)


def _box_rects(lo, hi, remission: float) -> list[Rect]:
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    dx, dy, dz = hi - lo
    ex, ey, ez = np.array([dx, 0, 0.0]), np.array([0, dy, 0.0]), np.array([0, 0, dz])
    return [
        Rect(lo, ex, ey, remission),
        Rect(lo + ez, ex, ey, remission),
        Rect(lo, ex, ez, remission),
        Rect(lo + ey, ex, ez, remission),
        Rect(lo, ey, ez, remission),
        Rect(lo + ex, ey, ez, remission),
    ]


def _room_shell(half_x: float, half_y: float, floor_z: float, ceil_z: float) -> list[Rect]:
    ex = np.array([2 * half_x, 0, 0.0])
    ey = np.array([0, 2 * half_y, 0.0])
    ez = np.array([0, 0, ceil_z - floor_z])
    c0 = np.array([-half_x, -half_y, floor_z])
    return [
        Rect(c0, ex, ey, FLOOR_REMISSION),
        Rect(c0 + ez, ex, ey, CEILING_REMISSION),
        Rect(c0, ex, ez, WALL_REMISSION),
        Rect(c0 + ey, ex, ez, WALL_REMISSION),
        Rect(c0, ey, ez, WALL_REMISSION),
        Rect(c0 + ex, ey, ez, WALL_REMISSION),
    ]


@dataclass(frozen=True)
class SyntheticScene:
    kind: str
    seed: int
    rects: tuple
    world_points: WorldPointSet

    def render(self, pose: RigidTransform, sensor: SensorModel) -> RangeImage:
        """Exact ground-truth range image for a world-from-sensor pose."""
        flat = np.arange(sensor.h * sensor.w)
        vv, uu = np.divmod(flat, sensor.w)
        dirs = ray_directions(sensor, vv, uu) @ pose.rotation.T
        best_t = np.full(len(dirs), np.inf)
        best_rem = np.zeros(len(dirs))
        for rect in self.rects:
            t = rect.intersect(pose.translation, dirs)
            closer = t < best_t
            best_t[closer] = t[closer]
            best_rem[closer] = rect.remission
        shape = (sensor.h, sensor.w)
        d = best_t.reshape(shape)
        rem = best_rem.reshape(shape)
        valid = np.isfinite(d) & sensor.in_range(d) & ~sensor.dead_mask()
        safe_d = np.where(valid, d, 0.0)
        return RangeImage.from_planes(
            sensor.normalize_depth(safe_d).astype(np.float32),
            (rem / 255.0).astype(np.float32),
            valid,
        )

    def scan(self, pose: RigidTransform, sensor: SensorModel, frame_id: str = "") -> PointCloud:
        """Simulated scan at a pose: the rendered image backprojected."""
        return backproject(self.render(pose, sensor), sensor, frame_id=frame_id)


def _sample_surface_points(rects, density: float, rng: np.random.Generator) -> WorldPointSet:
    pts, rems = [], []
    for rect in rects:
        n = max(1, int(round(rect.area * density)))
        u1 = rng.random(n)
        u2 = rng.random(n)
        pts.append(rect.origin + u1[:, None] * rect.edge1 + u2[:, None] * rect.edge2)
        rems.append(np.full(n, rect.remission))
    points = np.concatenate(pts)
    return WorldPointSet(points, np.concatenate(rems), np.zeros(len(points), dtype=np.int64))


def make_synthetic_scene(kind: str, seed: int = 0, density: float = 40.0) -> SyntheticScene:
    """Build a deterministic scene; the sensor origin sits at the world origin.

    room: 20 x 10 m shell. corridor: 60 x 8 m shell (long axis x).
    occluders: 80 x 24 m shell plus seeded boxes scattered off the +x axis.
    """
    if kind not in SCENE_KINDS:
        raise DataFormatError(f"unknown scene kind {kind!r}; choose from {SCENE_KINDS}")
    floor_z = -SENSOR_HEIGHT
    ceil_z = -SENSOR_HEIGHT + 4.0
    seq = np.random.SeedSequence(seed)
    box_seed, sample_seed = seq.spawn(2)
    rects: list[Rect]
    if kind == "room":
        rects = _room_shell(10.0, 5.0, floor_z, ceil_z)
    elif kind == "corridor":
        rects = _room_shell(30.0, 4.0, floor_z, ceil_z)
    else:
        rects = _room_shell(40.0, 12.0, floor_z, ceil_z)
        rng = np.random.Generator(np.random.PCG64(box_seed))
        for _ in range(10):
            sx, sy, sz = rng.uniform(1.0, 3.0, size=3)
            cx = rng.uniform(3.0, 36.0)
            cy = rng.uniform(2.0, 10.0) * (1 if rng.random() < 0.5 else -1)
            lo = np.array([cx - sx / 2, cy - sy / 2, floor_z])
            rects.extend(_box_rects(lo, lo + [sx, sy, sz], BOX_REMISSION))
    sample_rng = np.random.Generator(np.random.PCG64(sample_seed))
    points = _sample_surface_points(rects, density, sample_rng)
    return SyntheticScene(kind=kind, seed=seed, rects=tuple(rects), world_points=points)
