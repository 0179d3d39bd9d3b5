"""File formats: raw scan binaries, pose text files, range-image containers,
and run configuration.

Readers reject malformed input outright; serialization round-trips are
bit-exact.
"""

from __future__ import annotations

import configparser
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .geometry import PointCloud, RigidTransform
from .projection import RangeImage, SensorModel

RANGE_IMAGE_MAGIC = b"SDRI"
RANGE_IMAGE_VERSION = 1
POSE_ORTHONORMAL_TOL = 1e-6


# ---------------------------------------------------------------------------
# point-cloud binaries (x, y, z, reflectance as little-endian float32)
# ---------------------------------------------------------------------------

def read_cloud_bin(path, frame_id: str = "") -> PointCloud:
    """Read consecutive 16-byte (x, y, z, reflectance) float32 records.

    Reflectance is stored in [0, 1] and scaled to the 0-255 remission range.
    """
    raw = Path(path).read_bytes()
    if len(raw) % 16 != 0:
        raise DataFormatError(f"{path}: length {len(raw)} is not a multiple of 16")
    data = np.frombuffer(raw, dtype="<f4").reshape(-1, 4)
    bad = ~np.isfinite(data).all(axis=1)
    if bad.any():
        raise DataFormatError(f"{path}: non-finite values at record {int(np.nonzero(bad)[0][0])}")
    refl = data[:, 3].astype(np.float64)
    out_of_range = (refl < 0.0) | (refl > 1.0)
    if out_of_range.any():
        raise DataFormatError(
            f"{path}: reflectance outside [0, 1] at record {int(np.nonzero(out_of_range)[0][0])}"
        )
    return PointCloud(data[:, :3].astype(np.float64), refl * 255.0, frame_id=frame_id)


def write_cloud_bin(cloud: PointCloud, path) -> None:
    data = np.empty((len(cloud), 4), dtype="<f4")
    data[:, :3] = cloud.points.astype(np.float32)
    data[:, 3] = (cloud.remissions / 255.0).astype(np.float32)
    Path(path).write_bytes(data.tobytes())


# ---------------------------------------------------------------------------
# pose files (frame index + 3x4 row-major rotation|translation per line)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoseRecord:
    frame_index: int
    world_from_sensor: RigidTransform


def read_poses(path) -> list[PoseRecord]:
    """Parse 'frame r11 ... r33 t3' lines; rotations validated orthonormal."""
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 13:
                raise DataFormatError(f"{path}:{lineno}: expected 13 fields, got {len(parts)}")
            try:
                frame = int(parts[0])
                vals = np.array([float(p) for p in parts[1:]], dtype=np.float64)
            except ValueError as e:
                raise DataFormatError(f"{path}:{lineno}: {e}") from e
            if not np.all(np.isfinite(vals)):
                raise DataFormatError(f"{path}:{lineno}: non-finite pose entries")
            m = vals.reshape(3, 4)
            try:
                pose = RigidTransform(m[:, :3], m[:, 3], tol=POSE_ORTHONORMAL_TOL)
            except Exception as e:
                raise DataFormatError(f"{path}:{lineno}: {e}") from e
            records.append(PoseRecord(frame, pose))
    return records


def pose_lookup(records) -> dict[int, RigidTransform]:
    return {r.frame_index: r.world_from_sensor for r in records}


# ---------------------------------------------------------------------------
# range-image container
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sHHHH")  # magic, version, h, w, reserved


def write_range_image(img: RangeImage, path) -> None:
    """Self-describing container: 12-byte header, two float32 planes, packed validity."""
    h, w = img.shape
    header = _HEADER.pack(RANGE_IMAGE_MAGIC, RANGE_IMAGE_VERSION, h, w, 0)
    bits = np.packbits(img.valid.reshape(-1))
    with open(path, "wb") as f:
        f.write(header)
        f.write(img.depth.astype("<f4").tobytes())
        f.write(img.remission.astype("<f4").tobytes())
        f.write(bits.tobytes())


def read_range_image(path) -> RangeImage:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DataFormatError(f"{path}: truncated header")
    magic, version, h, w, _ = _HEADER.unpack_from(raw)
    if magic != RANGE_IMAGE_MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != RANGE_IMAGE_VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    plane = h * w * 4
    nbits = (h * w + 7) // 8
    expected = _HEADER.size + 2 * plane + nbits
    if len(raw) != expected:
        raise DataFormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    off = _HEADER.size
    depth = np.frombuffer(raw, dtype="<f4", count=h * w, offset=off).reshape(h, w)
    rem = np.frombuffer(raw, dtype="<f4", count=h * w, offset=off + plane).reshape(h, w)
    bits = np.frombuffer(raw, dtype=np.uint8, count=nbits, offset=off + 2 * plane)
    valid = np.unpackbits(bits, count=h * w).reshape(h, w).astype(bool)
    return RangeImage(depth.copy(), rem.copy(), valid)


# ---------------------------------------------------------------------------
# run configuration (key=value sections)
# ---------------------------------------------------------------------------

DEFAULT_CONFIG_TEXT = """\
[sensor]
height = 64
width = 1024
fov_up = 3.0
fov_down = 25.0
alpha = 6.0
min_range = 1.0
max_range = 80.0

[sampler]
omega = 0.1
delta = 5.0
steps = 50
seed = 0

[task]
placement = none
denoiser = oracle
"""


@dataclass(frozen=True)
class RunConfig:
    sensor: SensorModel
    omega: float
    delta: float
    steps: int
    seed: int
    placement: str = "none"
    denoiser: str = "oracle"
    input_path: str | None = None
    out_dir: str | None = None

    @classmethod
    def defaults(cls) -> "RunConfig":
        return _parse_config_text(DEFAULT_CONFIG_TEXT)


def _parse_config_text(text: str) -> RunConfig:
    cp = configparser.ConfigParser()
    cp.read_string(text)
    try:
        s = cp["sensor"]
        sensor = SensorModel(
            h=s.getint("height", 64),
            w=s.getint("width", 1024),
            fov_up_deg=s.getfloat("fov_up", 3.0),
            fov_down_deg=s.getfloat("fov_down", 25.0),
            alpha=s.getfloat("alpha", 6.0),
            min_range=s.getfloat("min_range", 1.0),
            max_range=s.getfloat("max_range", 80.0),
        )
        sa = cp["sampler"] if cp.has_section("sampler") else {}
        delta_raw = str(sa.get("delta", "5.0")).strip().lower()
        delta = float("inf") if delta_raw in ("inf", "no-limit", "none") else float(delta_raw)
        task = cp["task"] if cp.has_section("task") else {}
        paths = cp["paths"] if cp.has_section("paths") else {}
        return RunConfig(
            sensor=sensor,
            omega=float(sa.get("omega", 0.1)),
            delta=delta,
            steps=int(sa.get("steps", 1000)),
            seed=int(sa.get("seed", 0)),
            placement=str(task.get("placement", "none")),
            denoiser=str(task.get("denoiser", "oracle")),
            input_path=paths.get("input") or None,
            out_dir=paths.get("out_dir") or None,
        )
    except (configparser.Error, KeyError, ValueError) as e:
        raise DataFormatError(f"bad run config: {e}") from e


def load_run_config(path) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return _parse_config_text(text)
    except DataFormatError as e:
        raise DataFormatError(f"{path}: {e}") from e
