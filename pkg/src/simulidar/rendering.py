"""Raster emission of images and clouds for visual inspection."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import PointCloud, WorldPointSet
from .projection import RangeImage


def _to_u8(plane: np.ndarray, scale: float) -> np.ndarray:
    return np.clip(plane * scale, 0, 255).astype(np.uint8)


def write_range_image_pngs(img: RangeImage, out_dir, stem: str) -> list[Path]:
    """Grayscale depth and remission rasters; invalid pixels render black."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, plane, scale in (("depth", img.depth, 255.0), ("remission", img.remission, 255.0)):
        raster = np.where(img.valid, plane, 0.0)
        p = out_dir / f"{stem}_{name}.png"
        Image.fromarray(_to_u8(raster, scale), mode="L").save(p)
        paths.append(p)
    return paths


def write_cloud_png(cloud: PointCloud | WorldPointSet, out_dir, stem: str,
                    extent: float = 50.0, size: int = 512) -> Path:
    """Top-down occupancy raster of the points within +-extent meters."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pts = np.asarray(cloud.points)
    raster = np.zeros((size, size), dtype=np.uint8)
    if len(pts):
        xi = ((pts[:, 0] + extent) / (2 * extent) * size).astype(np.int64)
        yi = ((pts[:, 1] + extent) / (2 * extent) * size).astype(np.int64)
        keep = (xi >= 0) & (xi < size) & (yi >= 0) & (yi < size)
        raster[size - 1 - yi[keep], xi[keep]] = 255
    p = Path(out_dir) / f"{stem}_topdown.png"
    Image.fromarray(raster, mode="L").save(p)
    return p


def render_outputs(images, clouds, out_dir) -> list[Path]:
    """Emit rasters for per-view images and merged clouds into out_dir."""
    paths = []
    for k, img in enumerate(images or []):
        paths.extend(write_range_image_pngs(img, out_dir, f"view{k:02d}"))
    for k, cloud in enumerate(clouds or []):
        paths.append(write_cloud_png(cloud, out_dir, f"cloud{k:02d}"))
    return paths
