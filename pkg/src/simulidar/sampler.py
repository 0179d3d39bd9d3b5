"""Multi-view conditional diffusion sampling over range images.

Each view runs a conditioned reverse-diffusion step per timestep; the
per-view results are then backprojected, merged into one world point set,
re-rendered into every view (enforcing shared 3D structure), clamped back
to the per-view prediction where the metric depth disagrees by more than
delta, and finally mixed with weight omega. With a single view and omega=0
this collapses exactly to plain conditional sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataFormatError, GeometryError
from .projection import RangeImage, SensorModel, project_arrays, ray_directions
from .schedule import forward_noise, schedule_linear_scaled
from .views import ViewSet

STEP_KERNELS = ("ancestral", "langevin")


@dataclass(frozen=True)
class SamplerConfig:
    """Sampling hyperparameters.

    omega weighs the consistency image into each view (0 disables the
    coupling); delta is the metric-depth clamp in meters (math.inf for no
    limit). deterministic=True zeroes every per-step noise draw, leaving
    only the seeded initialization random.
    """

    omega: float = 0.1
    delta: float = 5.0
    schedule: NoiseSchedule = field(default_factory=lambda: schedule_linear_scaled(1000))
    master_seed: int = 0
    consistency_zbuffer: bool = True
    deterministic: bool = False
    noise_at_final_step: bool = False
    hard_condition_masks: bool = True
    step_kernel: str = "ancestral"
    langevin_step_scale: float = 2e-5

    def __post_init__(self):
        if not (0.0 <= self.omega <= 1.0):
            raise ValueError("omega must lie in [0, 1]")
        if not (self.delta > 0.0):
            raise ValueError("delta must be positive (math.inf for no limit)")
        if self.step_kernel not in STEP_KERNELS:
            raise ValueError(f"step_kernel must be one of {STEP_KERNELS}")


@dataclass
class ViewState:
    """Mutable per-view sampling state."""

    image: np.ndarray
    condition: RangeImage
    condition_mask: np.ndarray
    rng: np.random.Generator

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.float32)
        mask = np.asarray(self.condition_mask, dtype=bool)
        if mask.shape != self.condition.shape or self.image.shape[:2] != mask.shape:
            raise GeometryError("view state shapes are inconsistent")
        self.condition_mask = mask & self.condition.valid


def rng_streams(master_seed: int, n: int) -> list[np.random.Generator]:
    """Independent per-view generators; stream k does not depend on n."""
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(master_seed).spawn(n)]


def blend(x_tilde: np.ndarray, x_bar: np.ndarray, omega: float) -> np.ndarray:
    """Per-pixel convex mix (1-omega)*x_tilde + omega*x_bar.

    Evaluated as x_tilde + omega*(x_bar - x_tilde) so the result never
    leaves [min, max] of the operands, and the omega endpoints are exact.
    """
    x_tilde = np.asarray(x_tilde)
    x_bar = np.asarray(x_bar)
    if x_tilde.shape != x_bar.shape:
        raise GeometryError(f"blend shapes differ: {x_tilde.shape} vs {x_bar.shape}")
    if not (0.0 <= omega <= 1.0):
        raise ValueError("omega must lie in [0, 1]")
    if omega == 0.0:
        return x_tilde.copy()
    if omega == 1.0:
        return x_bar.copy()
    return x_tilde + omega * (x_bar - x_tilde)


def _reverse_step(x, eps, t, schedule, rng, config):
    """One unconditioned reverse update from x_t to x_{t-1}."""
    if config.step_kernel == "ancestral":
        beta = float(schedule.beta[t])
        ab = float(schedule.alpha_bar[t])
        out = (x - (beta / math.sqrt(1.0 - ab)) * eps) / math.sqrt(float(schedule.alpha[t]))
        noise_scale = float(schedule.sigma[t])
    else:
        ab = float(schedule.alpha_bar[t])
        eta = config.langevin_step_scale * (1.0 - ab) / (1.0 - float(schedule.alpha_bar[1]))
        score = -eps / math.sqrt(1.0 - ab)
        out = x + (eta / 2.0) * score
        noise_scale = math.sqrt(eta)
    if (t > 1 or config.noise_at_final_step) and not config.deterministic:
        out = out + noise_scale * rng.standard_normal(x.shape, dtype=np.float32)
    return out.astype(np.float32, copy=False)


def _condition_replacement(cond_channels, t_prev, schedule, rng, config):
    """Forward-noised condition used to overwrite the known pixels."""
    if t_prev == 0:
        return cond_channels
    if config.deterministic:
        ab = float(schedule.alpha_bar[t_prev])
        return (math.sqrt(ab) * cond_channels).astype(np.float32, copy=False)
    return forward_noise(cond_channels, t_prev, schedule, rng)


def _apply_condition(x, cond_channels, mask, t_prev, schedule, rng, config):
    if not mask.any():
        return x
    repl = _condition_replacement(cond_channels, t_prev, schedule, rng, config)
    return np.where(mask[..., None], repl, x)


def conditioned_step(state: ViewState, t: int, denoiser, config: SamplerConfig) -> np.ndarray:
    """One conditioned reverse step for a single view.

    Runs the reverse update with the denoiser's noise estimate, then
    overwrites the known pixels with the forward-noised condition (the
    condition itself once t-1 reaches 0).
    """
    if not (1 <= t <= config.schedule.steps):
        raise ValueError(f"t={t} outside [1, {config.schedule.steps}]")
    eps = np.asarray(denoiser.predict(state.image[None], t))
    if eps.shape != state.image[None].shape:
        raise DataFormatError(f"denoiser returned shape {eps.shape}, expected {state.image[None].shape}")
    x = _reverse_step(state.image, eps[0], t, config.schedule, state.rng, config)
    return _apply_condition(
        x, state.condition.channels(), state.condition_mask, t - 1, config.schedule, state.rng, config
    )


class ConsistencyProjector:
    """World-merge re-rendering shared across sampling steps.

    For a list of per-view images: backproject every pixel within scanner
    limits, move all points into the world frame, re-render the merged set
    into each view with z-buffering, and keep the re-rendered value only
    where it is covered and within delta meters of the view's own depth.
    """

    def __init__(self, views: ViewSet, sensor: SensorModel, config: SamplerConfig):
        self.views = views
        self.sensor = sensor
        self.config = config
        vv, uu = np.divmod(np.arange(sensor.h * sensor.w), sensor.w)
        self._rays = ray_directions(sensor, vv, uu).reshape(sensor.h, sensor.w, 3)
        self._alive = ~sensor.dead_mask()

    def project_with_masks(self, images: Sequence[np.ndarray]):
        """Returns (consistency images, reverted-pixel masks)."""
        sensor = self.sensor
        if len(images) != len(self.views):
            raise GeometryError(f"{len(images)} images for {len(self.views)} views")
        world_pts, world_rem = [], []
        depth_metric = []
        for k, img in enumerate(images):
            img = np.asarray(img, dtype=np.float32)
            if img.shape != (sensor.h, sensor.w, 2):
                raise GeometryError(f"image {k} has shape {img.shape}")
            d = sensor.denormalize_depth(img[..., 0])
            depth_metric.append(d)
            keep = sensor.in_range(d) & self._alive
            pose = self.views.poses[k]
            pts = self._rays[keep] * d[keep][:, None]
            world_pts.append(pts @ pose.rotation.T + pose.translation)
            world_rem.append(img[..., 1][keep].astype(np.float64) * 255.0)
        merged = np.concatenate(world_pts) if world_pts else np.empty((0, 3))
        merged_rem = np.concatenate(world_rem) if world_rem else np.empty(0)

        outs, reverted = [], []
        for k, img in enumerate(images):
            pose = self.views.poses[k]
            local = (merged - pose.translation) @ pose.rotation
            depth32, rem32, covered, depth_m = project_arrays(
                local, merged_rem, sensor, zbuffer=self.config.consistency_zbuffer
            )
            with np.errstate(invalid="ignore"):
                accept = covered & (np.abs(depth_m - depth_metric[k]) <= self.config.delta)
            out = np.asarray(img, dtype=np.float32).copy()
            out[..., 0] = np.where(accept, depth32, out[..., 0])
            out[..., 1] = np.where(accept, rem32, out[..., 1])
            outs.append(out)
            reverted.append(~accept)
        return outs, reverted

    def __call__(self, images: Sequence[np.ndarray]) -> list[np.ndarray]:
        return self.project_with_masks(images)[0]


def consistency_project(
    images: Sequence[np.ndarray], views: ViewSet, sensor: SensorModel, config: SamplerConfig
) -> list[np.ndarray]:
    """One-shot world-merge re-rendering of per-view images."""
    return ConsistencyProjector(views, sensor, config)(images)


def _finalize(x: np.ndarray, sensor: SensorModel) -> RangeImage:
    d = sensor.denormalize_depth(x[..., 0])
    valid = sensor.in_range(d) & ~sensor.dead_mask()
    return RangeImage.from_planes(x[..., 0], np.clip(x[..., 1], 0.0, 1.0), valid)


def _run(conditions, masks, sensor, denoiser, config, views, use_consistency):
    n_views = len(conditions)
    schedule = config.schedule
    streams = rng_streams(config.master_seed, n_views)
    cond_channels = []
    cond_masks = []
    for k, c in enumerate(conditions):
        if c.shape != (sensor.h, sensor.w):
            raise GeometryError(f"condition {k} shape {c.shape} != sensor {(sensor.h, sensor.w)}")
        m = c.valid if masks is None or masks[k] is None else np.asarray(masks[k], dtype=bool)
        if m.shape != c.shape:
            raise GeometryError(f"mask {k} shape {m.shape} != {c.shape}")
        if not config.hard_condition_masks and k > 0:
            m = np.zeros_like(m)
        cond_channels.append(c.channels())
        cond_masks.append(m & c.valid)

    x = [st.standard_normal((sensor.h, sensor.w, 2), dtype=np.float32) for st in streams]

    projector = None
    if use_consistency and config.omega > 0.0:
        projector = ConsistencyProjector(views, sensor, config)

    for t in range(schedule.steps, 0, -1):
        batch = np.stack(x)
        eps = np.asarray(denoiser.predict(batch, t))
        if eps.shape != batch.shape:
            raise DataFormatError(f"denoiser returned shape {eps.shape}, expected {batch.shape}")
        for k in range(n_views):
            stepped = _reverse_step(x[k], eps[k], t, schedule, streams[k], config)
            x[k] = _apply_condition(
                stepped, cond_channels[k], cond_masks[k], t - 1, schedule, streams[k], config
            )
        if projector is not None:
            xbars = projector(x)
            x = [blend(x[k], xbars[k], config.omega) for k in range(n_views)]

    # The t-1 = 0 conditioning takes precedence over the final blend.
    for k in range(n_views):
        if cond_masks[k].any():
            x[k] = np.where(cond_masks[k][..., None], cond_channels[k], x[k])
    return [_finalize(xk, sensor) for xk in x]


def sample_single(
    condition: RangeImage,
    mask: np.ndarray | None,
    sensor: SensorModel,
    denoiser,
    config: SamplerConfig,
) -> RangeImage:
    """Conditional sampling of one view (no cross-view coupling)."""
    return _run([condition], [mask], sensor, denoiser, config, views=None, use_consistency=False)[0]


def sample_simultaneous(
    conditions: Sequence[RangeImage],
    masks: Sequence[np.ndarray | None] | None,
    views: ViewSet,
    sensor: SensorModel,
    denoiser,
    config: SamplerConfig,
) -> list[RangeImage]:
    """Lock-step conditional sampling of all views with consistency coupling."""
    if len(conditions) != len(views):
        raise GeometryError(f"{len(conditions)} conditions for {len(views)} views")
    if masks is not None and len(masks) != len(conditions):
        raise GeometryError(f"{len(masks)} masks for {len(conditions)} conditions")
    return _run(conditions, masks, sensor, denoiser, config, views=views, use_consistency=True)
