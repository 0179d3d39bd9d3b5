import numpy as np
import pytest

from simulidar.geometry import PointCloud, RigidTransform
from simulidar.projection import SensorModel
from simulidar.scenes import make_synthetic_scene


@pytest.fixture(scope="session")
def sensor():
    return SensorModel()


@pytest.fixture(scope="session")
def small_sensor():
    return SensorModel(h=16, w=128)


@pytest.fixture(scope="session")
def room_scene():
    return make_synthetic_scene("room", seed=11)


@pytest.fixture(scope="session")
def occluder_scene():
    return make_synthetic_scene("occluders", seed=3)


def random_pose(rng: np.random.Generator, max_translation: float = 10.0) -> RigidTransform:
    """Uniform random rotation (QR of a Gaussian) plus bounded translation."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 2] = -q[:, 2]
    t = rng.uniform(-max_translation, max_translation, size=3)
    return RigidTransform(q, t)


def random_cloud(rng: np.random.Generator, n: int, spread: float = 40.0) -> PointCloud:
    pts = rng.uniform(-spread, spread, size=(n, 3))
    rem = rng.uniform(0.0, 255.0, size=n)
    return PointCloud(pts, rem)


def fov_cloud(rng: np.random.Generator, n: int, sensor: SensorModel, margin: float = 0.1) -> PointCloud:
    """Random points strictly inside the sensor's field of view and range."""
    az = rng.uniform(-np.pi, np.pi, size=n)
    el = np.radians(rng.uniform(-sensor.fov_down_deg + 0.05, sensor.fov_up_deg - 0.05, size=n))
    d = rng.uniform(sensor.min_range + margin, sensor.max_range - margin, size=n)
    pts = np.stack([
        d * np.cos(el) * np.cos(az),
        d * np.cos(el) * np.sin(az),
        d * np.sin(el),
    ], axis=1)
    return PointCloud(pts, rng.uniform(0, 255, size=n))
