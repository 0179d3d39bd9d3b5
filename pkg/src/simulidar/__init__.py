"""Multi-view consistent diffusion sampling for LiDAR range images."""

from .geometry import (
    Point3,
    PointCloud,
    RigidTransform,
    WorldPointSet,
    compose,
    invert,
    merge_to_world,
    relative_transform,
    transform_cloud,
)
from .projection import (
    RangeImage,
    SensorModel,
    apply_condition_mask,
    backproject,
    interpolate_densify,
    project,
)
from .sampler import (
    SamplerConfig,
    ViewState,
    blend,
    conditioned_step,
    consistency_project,
    sample_simultaneous,
    sample_single,
)
from .schedule import NoiseSchedule, forward_noise, schedule_linear, schedule_linear_scaled
from .views import ViewSet, place_views_circle, place_views_road, place_views_trajectory, recast

__version__ = "0.1.0"

__all__ = [
    "Point3",
    "PointCloud",
    "RigidTransform",
    "WorldPointSet",
    "compose",
    "invert",
    "merge_to_world",
    "relative_transform",
    "transform_cloud",
    "RangeImage",
    "SensorModel",
    "apply_condition_mask",
    "backproject",
    "interpolate_densify",
    "project",
    "SamplerConfig",
    "ViewState",
    "blend",
    "conditioned_step",
    "consistency_project",
    "sample_simultaneous",
    "sample_single",
    "NoiseSchedule",
    "forward_noise",
    "schedule_linear",
    "schedule_linear_scaled",
    "ViewSet",
    "place_views_circle",
    "place_views_road",
    "place_views_trajectory",
    "recast",
]
