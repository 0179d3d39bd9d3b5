"""Command-line task drivers: densify, inpaint, novel-view, scene-complete,
recast-eval, and ablation sweeps.

Every run is deterministic under --seed. Reports are emitted as key=value
lines on stdout and, with --out-dir, as report.json plus rasters and range
images on disk. Exit codes: 0 success, 2 usage error, 3 data error,
4 protocol/denoiser error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import dataio, rendering
from .denoisers import OracleDenoiser, ZeroDenoiser
from .errors import DataFormatError, ProtocolError, SimulidarError
from .geometry import RigidTransform, merge_to_world, translation
from .metrics import completion_score, mae, recast_stats
from .projection import RangeImage, SensorModel, apply_condition_mask, backproject, interpolate_densify, project
from .remote import RemoteDenoiser, open_transport
from .sampler import SamplerConfig, sample_simultaneous, sample_single
from .schedule import schedule_linear_scaled
from .scenes import SCENE_KINDS, make_synthetic_scene
from .views import ViewSet, concat_view_sets, place_views_circle, place_views_road, place_views_trajectory, recast

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_PROTOCOL = 4

ROAD_PROGRESSION = (5.0, -5.0, 10.0, -10.0, 15.0, -15.0)
SYNTHETIC_FRAME_SPACING = 0.88  # meters between virtual drive frames


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    src = p.add_argument_group("input")
    src.add_argument("--scene", choices=SCENE_KINDS, help="synthetic scene input")
    src.add_argument("--scene-seed", type=int, default=0)
    src.add_argument("--input", help="point-cloud .bin input")
    src.add_argument("--poses", help="pose text file (dataset mode)")
    src.add_argument("--frame", type=int, default=0, help="input frame index in --poses")
    src.add_argument("--velodyne-dir", help="directory of per-frame .bin scans (ground truth)")

    sens = p.add_argument_group("sensor")
    sens.add_argument("--height", type=int, default=None)
    sens.add_argument("--width", type=int, default=None)
    sens.add_argument("--fov-up", type=float, default=None)
    sens.add_argument("--fov-down", type=float, default=None)
    sens.add_argument("--alpha", type=float, default=None)
    sens.add_argument("--min-range", type=float, default=None)
    sens.add_argument("--max-range", type=float, default=None)

    samp = p.add_argument_group("sampler")
    samp.add_argument("--omega", type=float, default=None)
    samp.add_argument("--delta", type=_parse_delta, default=None, help="meters, or 'inf'/'no-limit'")
    samp.add_argument("--steps", type=int, default=None)
    samp.add_argument("--seed", type=int, default=None)
    samp.add_argument("--deterministic", action="store_true", help="zero all per-step noise draws")
    samp.add_argument("--denoiser", default=None, help="oracle | zero | remote:<endpoint>")
    samp.add_argument("--placement", default=None,
                      help="none | circle:R,N | circles:R,N;R,N | road:off,... | trajectory:stride,count")
    samp.add_argument("--views", type=int, default=None,
                      help="cap on synthetic view count (road progression prefix)")
    samp.add_argument("--config", help="run-config file overriding sensor/sampler defaults")

    out = p.add_argument_group("output")
    out.add_argument("--out-dir", help="directory for report.json, images and rasters")


def _parse_delta(text: str) -> float:
    if text.strip().lower() in ("inf", "no-limit", "none"):
        return math.inf
    return float(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simulidar", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("densify", help="16-beam to full-beam generation")
    d.add_argument("--keep-every", type=int, default=4, help="keep every Nth beam row")
    d.add_argument("--method", default="diffusion",
                   choices=("diffusion", "nearest", "bilinear", "bicubic"))
    _add_common(d)

    i = sub.add_parser("inpaint", help="fill an angular gap")
    i.add_argument("--gap-deg", type=float, default=90.0)
    i.add_argument("--gap-center-deg", type=float, default=-72.0,
                   help="gap center azimuth, negative = right of forward")
    i.add_argument("--missing-fraction", type=float, default=None,
                   help="overrides --gap-deg as a fraction of the full sweep")
    _add_common(i)

    n = sub.add_parser("novel-view", help="generate scans at later trajectory poses")
    n.add_argument("--stride", type=int, default=5)
    n.add_argument("--count", type=int, default=7)
    _add_common(n)

    s = sub.add_parser("scene-complete", help="expand coverage and score vs world points")
    s.add_argument("--tau", type=float, default=0.2,
                   help="match threshold in meters (benchmark threshold is not published)")
    s.add_argument("--gt-bin", help="ground-truth world points as .bin (dataset mode)")
    _add_common(s)

    r = sub.add_parser("recast-eval", help="recasting-only accuracy per view")
    r.add_argument("--stride", type=int, default=5)
    r.add_argument("--count", type=int, default=7)
    _add_common(r)

    w = sub.add_parser("sweep", help="repeat a task across one parameter axis")
    w.add_argument("--task", required=True, choices=("densify", "inpaint", "novel-view", "scene-complete"))
    w.add_argument("--axis", required=True, choices=("omega", "delta", "views", "placement"))
    w.add_argument("--values", required=True, help="comma-separated (';'-separated for placement)")
    w.add_argument("--keep-every", type=int, default=4)
    w.add_argument("--gap-deg", type=float, default=90.0)
    w.add_argument("--gap-center-deg", type=float, default=-72.0)
    w.add_argument("--missing-fraction", type=float, default=None)
    w.add_argument("--stride", type=int, default=5)
    w.add_argument("--count", type=int, default=3)
    w.add_argument("--tau", type=float, default=0.2)
    w.add_argument("--gt-bin", default=None)
    w.add_argument("--method", default="diffusion")
    _add_common(w)

    return p


# ---------------------------------------------------------------------------
# shared task context
# ---------------------------------------------------------------------------

class _FrameIndexedPoses:
    """Pose-file poses addressed by frame number, rejecting gaps loudly."""

    def __init__(self, lookup: dict):
        self._lookup = lookup
        self._size = max(lookup) + 1 if lookup else 0

    def __len__(self) -> int:
        return self._size

    def __getitem__(self, frame: int) -> RigidTransform:
        try:
            return self._lookup[frame]
        except KeyError:
            raise DataFormatError(f"pose file has no frame {frame}") from None


class TaskContext:
    """Resolved inputs for one task run."""

    def __init__(self, args):
        self.args = args
        base = dataio.load_run_config(args.config) if args.config else dataio.RunConfig.defaults()

        def pick(cli_value, cfg_value):
            return cfg_value if cli_value is None else cli_value

        self.sensor = SensorModel(
            h=pick(args.height, base.sensor.h),
            w=pick(args.width, base.sensor.w),
            fov_up_deg=pick(args.fov_up, base.sensor.fov_up_deg),
            fov_down_deg=pick(args.fov_down, base.sensor.fov_down_deg),
            alpha=pick(args.alpha, base.sensor.alpha),
            min_range=pick(args.min_range, base.sensor.min_range),
            max_range=pick(args.max_range, base.sensor.max_range),
        )
        steps = pick(args.steps, base.steps)
        self.config = SamplerConfig(
            omega=pick(args.omega, base.omega),
            delta=pick(args.delta, base.delta),
            schedule=schedule_linear_scaled(steps),
            master_seed=pick(args.seed, base.seed),
            deterministic=args.deterministic,
        )
        self.placement = pick(args.placement, base.placement)
        self.denoiser_name = pick(args.denoiser, base.denoiser)
        self.input_path = pick(args.input, base.input_path)
        self.out_dir = None if getattr(args, "suppress_out_dir", False) else pick(args.out_dir, base.out_dir)
        self.scene = None
        self.pose_records = None
        if args.scene:
            self.scene = make_synthetic_scene(args.scene, seed=args.scene_seed)
            self.input_pose = RigidTransform.identity()
            self.input_cloud = self.scene.scan(self.input_pose, self.sensor, frame_id="input")
        elif self.input_path:
            self.input_cloud = dataio.read_cloud_bin(self.input_path, frame_id="input")
            self.input_pose = RigidTransform.identity()
            if args.poses:
                self.pose_records = dataio.read_poses(args.poses)
                lookup = dataio.pose_lookup(self.pose_records)
                if args.frame not in lookup:
                    raise DataFormatError(f"frame {args.frame} not present in {args.poses}")
                self.input_pose = lookup[args.frame]
        else:
            raise DataFormatError("no input: pass --scene or --input")
        self.input_image = project(self.input_cloud, self.sensor)

    # -- view ground truth ---------------------------------------------------

    def gt_image(self, pose: RigidTransform, frame_index: int | None = None) -> RangeImage | None:
        if self.scene is not None:
            return self.scene.render(pose, self.sensor)
        if frame_index is not None and self.args.velodyne_dir:
            path = Path(self.args.velodyne_dir) / f"{frame_index:010d}.bin"
            if path.exists():
                return project(dataio.read_cloud_bin(path), self.sensor)
        return None

    def trajectory_poses(self, needed: int):
        if self.pose_records is not None:
            return _FrameIndexedPoses(dataio.pose_lookup(self.pose_records))
        # Synthetic straight drive along +x through the input pose.
        return [
            RigidTransform(
                self.input_pose.rotation,
                self.input_pose.translation + self.input_pose.rotation @ [i * SYNTHETIC_FRAME_SPACING, 0.0, 0.0],
                check=False,
            )
            for i in range(needed)
        ]

    # -- placements ----------------------------------------------------------

    def build_views(self) -> ViewSet:
        spec = self.placement
        if spec == "none":
            return ViewSet.from_poses([self.input_pose], ["input"])
        kind, _, rest = spec.partition(":")
        if kind == "circle":
            radius, count = rest.split(",")
            return place_views_circle(self.input_pose, float(radius), int(count))
        if kind == "circles":
            sets = []
            for part in rest.split(";"):
                radius, count = part.split(",")
                sets.append(place_views_circle(self.input_pose, float(radius), int(count)))
            return concat_view_sets(*sets)
        if kind == "road":
            offsets = [float(v) for v in rest.split(",")] if rest else list(ROAD_PROGRESSION)
            if self.args.views is not None:
                offsets = offsets[: self.args.views]
            return place_views_road(self.input_cloud, offsets, center_pose=self.input_pose)
        if kind == "trajectory":
            stride, count = (int(v) for v in rest.split(","))
            poses = self.trajectory_poses(self.args.frame + stride * count + 1)
            return place_views_trajectory(poses, self.args.frame, stride, count)
        raise DataFormatError(f"bad placement spec {spec!r}")

    # -- denoiser -------------------------------------------------------------

    def make_denoiser(self, targets: np.ndarray):
        name = self.denoiser_name
        if name == "oracle":
            return OracleDenoiser(self.config.schedule, targets)
        if name == "zero":
            return ZeroDenoiser(self.sensor.h, self.sensor.w)
        if name.startswith("remote:"):
            return RemoteDenoiser(open_transport(name[len("remote:"):]))
        raise DataFormatError(f"unknown denoiser {name!r}")

    def oracle_targets(self, views: ViewSet, conditions, frame_indices=None) -> np.ndarray:
        """Per-view targets: ground truth where known, conditions otherwise."""
        targets = []
        for k, pose in enumerate(views.poses):
            fi = frame_indices[k] if frame_indices else None
            gt = self.gt_image(pose, fi)
            targets.append((gt if gt is not None else conditions[k]).channels())
        return np.stack(targets)


def _recast_conditions(ctx: TaskContext, condition0: RangeImage, views: ViewSet):
    """Per-view conditions: the masked input recast and re-projected."""
    conditions = [condition0]
    if len(views) > 1:
        partial = backproject(condition0, ctx.sensor)
        for cloud_k in recast(partial, views)[1:]:
            conditions.append(project(cloud_k, ctx.sensor))
    return conditions


def _sample(ctx: TaskContext, conditions, views: ViewSet, targets) -> list[RangeImage]:
    denoiser = ctx.make_denoiser(targets)
    try:
        if len(views) == 1:
            return [sample_single(conditions[0], None, ctx.sensor, denoiser, ctx.config)]
        return sample_simultaneous(conditions, None, views, ctx.sensor, denoiser, ctx.config)
    finally:
        if hasattr(denoiser, "close"):
            denoiser.close()


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------

def run_densify(ctx: TaskContext) -> dict:
    args = ctx.args
    if args.keep_every < 1 or args.keep_every > ctx.sensor.h:
        raise DataFormatError("--keep-every out of range")
    beam_mask = np.zeros((ctx.sensor.h, ctx.sensor.w), dtype=bool)
    beam_mask[:: args.keep_every, :] = True
    condition0 = apply_condition_mask(ctx.input_image, beam_mask)
    gt = ctx.gt_image(ctx.input_pose) or ctx.input_image

    if args.method != "diffusion":
        out = interpolate_densify(condition0, args.method, ctx.sensor)
        report = _image_report(out, gt, ctx, region=~beam_mask)
        report["task"] = "densify"
        report["method"] = args.method
        return report

    views = ctx.build_views()
    conditions = _recast_conditions(ctx, condition0, views)
    targets = ctx.oracle_targets(views, conditions)
    outputs = _sample(ctx, conditions, views, targets)
    report = _image_report(outputs[0], gt, ctx, region=~beam_mask, outputs=outputs)
    report["task"] = "densify"
    report["method"] = "diffusion"
    report["condition_rows"] = int(np.unique(np.nonzero(condition0.valid)[0]).size)
    return report


def gap_columns(sensor: SensorModel, gap_deg: float, center_deg: float) -> np.ndarray:
    """Boolean (w,) mask of the columns inside an angular gap."""
    center_u = (0.5 * (1.0 - center_deg / 180.0) * sensor.w) % sensor.w
    half_cols = gap_deg / 360.0 * sensor.w / 2.0
    cols = np.arange(sensor.w)
    dist = np.minimum(np.abs(cols + 0.5 - center_u), sensor.w - np.abs(cols + 0.5 - center_u))
    return dist < half_cols


def run_inpaint(ctx: TaskContext) -> dict:
    args = ctx.args
    gap_deg = args.gap_deg if args.missing_fraction is None else args.missing_fraction * 360.0
    if not (0.0 <= gap_deg < 360.0):
        raise DataFormatError("gap must lie in [0, 360) degrees")
    in_gap = gap_columns(ctx.sensor, gap_deg, args.gap_center_deg)
    keep = ~np.broadcast_to(in_gap, (ctx.sensor.h, ctx.sensor.w))
    condition0 = apply_condition_mask(ctx.input_image, keep)
    gt = ctx.gt_image(ctx.input_pose) or ctx.input_image

    views = ctx.build_views()
    conditions = _recast_conditions(ctx, condition0, views)
    targets = ctx.oracle_targets(views, conditions)
    outputs = _sample(ctx, conditions, views, targets)
    report = _image_report(outputs[0], gt, ctx, region=~keep, outputs=outputs)
    report["task"] = "inpaint"
    report["gap_deg"] = gap_deg
    report["gap_columns"] = int(in_gap.sum())
    return report


def run_novel_view(ctx: TaskContext) -> dict:
    args = ctx.args
    poses = ctx.trajectory_poses(args.frame + args.stride * args.count + 1)
    views = place_views_trajectory(poses, args.frame, args.stride, args.count)
    frame_indices = [args.frame + k * args.stride for k in range(args.count + 1)]

    conditions = _recast_conditions(ctx, ctx.input_image, views)
    targets = ctx.oracle_targets(views, conditions, frame_indices)
    outputs = _sample(ctx, conditions, views, targets)

    per_view = []
    for k, out in enumerate(outputs):
        gt_k = ctx.gt_image(views.poses[k], frame_indices[k])
        row = {"k": k, "label": views.labels[k]}
        if gt_k is not None:
            generated = ~conditions[k].valid
            row.update(_mae_dict(out, gt_k, ctx.sensor))
            if generated.any() and (gt_k.valid & generated).any():
                row.update(_mae_dict(out, gt_k, ctx.sensor, region=generated, prefix="generated_"))
        per_view.append(row)
    report = {
        "task": "novel-view",
        "per_view": per_view,
        "metrics": per_view[-1] if per_view else {},
    }
    _attach_run_params(report, ctx)
    _write_outputs(ctx, outputs)
    return report


def run_scene_complete(ctx: TaskContext) -> dict:
    args = ctx.args
    views = ctx.build_views()
    conditions = _recast_conditions(ctx, ctx.input_image, views)
    targets = ctx.oracle_targets(views, conditions)
    outputs = _sample(ctx, conditions, views, targets)

    clouds = [backproject(img, ctx.sensor) for img in outputs]
    merged = merge_to_world(clouds, list(views.poses))
    if ctx.scene is not None:
        gt_points = ctx.scene.world_points
    elif args.gt_bin:
        gt_cloud = dataio.read_cloud_bin(args.gt_bin)
        gt_points = merge_to_world([gt_cloud], [RigidTransform.identity()])
    else:
        raise DataFormatError("scene completion needs --scene or --gt-bin ground truth")
    score = completion_score(merged, gt_points, args.tau)
    report = {
        "task": "scene-complete",
        "metrics": score.to_dict(),
        "generated_points": len(merged),
        "views": len(views),
    }
    _attach_run_params(report, ctx)
    _write_outputs(ctx, outputs, clouds=[merged])
    return report


def run_recast_eval(ctx: TaskContext) -> dict:
    args = ctx.args
    poses = ctx.trajectory_poses(args.frame + args.stride * args.count + 1)
    views = place_views_trajectory(poses, args.frame, args.stride, args.count)
    frame_indices = [args.frame + k * args.stride for k in range(args.count + 1)]
    recast_clouds = recast(ctx.input_cloud, views)

    per_view = []
    origin = views.poses[0].translation
    for k, cloud_k in enumerate(recast_clouds):
        img_k = project(cloud_k, ctx.sensor)
        gt_k = ctx.gt_image(views.poses[k], frame_indices[k])
        row = {
            "k": k,
            "distance_m": float(np.linalg.norm(views.poses[k].translation - origin)),
        }
        if gt_k is not None and (img_k.valid & gt_k.valid).any():
            stats = recast_stats(img_k, gt_k, ctx.sensor)
            row.update(
                depth_mae=stats.depth_mae,
                remission_mae=stats.remission_mae,
                coverage_fraction=stats.coverage_fraction,
            )
        per_view.append(row)
    report = {"task": "recast-eval", "per_view": per_view, "metrics": per_view[-1] if per_view else {}}
    _attach_run_params(report, ctx)
    return report


TASK_RUNNERS = {
    "densify": run_densify,
    "inpaint": run_inpaint,
    "novel-view": run_novel_view,
    "scene-complete": run_scene_complete,
    "recast-eval": run_recast_eval,
}


def run_sweep(args) -> dict:
    values = args.values.split(";" if args.axis == "placement" else ",")
    rows = []
    for raw in values:
        raw = raw.strip()
        sub_args = argparse.Namespace(**vars(args))
        sub_args.command = args.task
        sub_args.out_dir = None
        sub_args.suppress_out_dir = True  # per-value runs emit no artifacts
        if args.axis == "omega":
            sub_args.omega = float(raw)
        elif args.axis == "delta":
            sub_args.delta = _parse_delta(raw)
        elif args.axis == "views":
            sub_args.views = int(raw)
            if sub_args.placement in (None, "none"):
                sub_args.placement = "road:" + ",".join(f"{v:g}" for v in ROAD_PROGRESSION)
        else:
            sub_args.placement = raw
        report = TASK_RUNNERS[args.task](TaskContext(sub_args))
        rows.append({"value": raw, "metrics": report.get("metrics", {})})
    return {"task": "sweep", "axis": args.axis, "swept_task": args.task, "rows": rows}


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------

def _mae_dict(pred, gt, sensor, region=None, prefix: str = "") -> dict:
    try:
        rep = mae(pred, gt, sensor, region=region)
    except DataFormatError:
        return {}
    return {prefix + k: v for k, v in rep.to_dict().items()}


def _image_report(out: RangeImage, gt: RangeImage, ctx: TaskContext, region=None, outputs=None) -> dict:
    metrics = _mae_dict(out, gt, ctx.sensor)
    if region is not None:
        metrics.update(_mae_dict(out, gt, ctx.sensor, region=region, prefix="generated_"))
    report = {"metrics": metrics}
    _attach_run_params(report, ctx)
    _write_outputs(ctx, outputs if outputs is not None else [out])
    return report


def _attach_run_params(report: dict, ctx: TaskContext) -> None:
    report["params"] = {
        "omega": ctx.config.omega,
        "delta": "inf" if math.isinf(ctx.config.delta) else ctx.config.delta,
        "steps": ctx.config.schedule.steps,
        "seed": ctx.config.master_seed,
        "placement": ctx.placement,
        "denoiser": ctx.denoiser_name,
        "height": ctx.sensor.h,
        "width": ctx.sensor.w,
    }


def _write_outputs(ctx: TaskContext, images, clouds=None) -> None:
    out_dir = ctx.out_dir
    if not out_dir or images is None:
        return
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k, img in enumerate(images):
        dataio.write_range_image(img, out_dir / f"view{k:02d}.sdri")
    rendering.render_outputs(images, clouds or [], out_dir)


def _flatten_kv(obj, prefix: str = "") -> list[str]:
    lines = []
    if isinstance(obj, dict):
        for key in sorted(obj):
            lines.extend(_flatten_kv(obj[key], f"{prefix}{key}."))
    elif isinstance(obj, (list, tuple)):
        for i, item in enumerate(obj):
            lines.extend(_flatten_kv(item, f"{prefix}{i}."))
    else:
        value = f"{obj:.6f}" if isinstance(obj, float) else str(obj)
        lines.append(f"{prefix[:-1]}={value}")
    return lines


def emit_report(report: dict, out_dir: str | None) -> str:
    text = "\n".join(_flatten_kv(report)) + "\n"
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text, encoding="utf-8")
        (out / "report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return text


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "sweep":
            report = run_sweep(args)
            out_dir = args.out_dir
        else:
            ctx = TaskContext(args)
            report = TASK_RUNNERS[args.command](ctx)
            out_dir = ctx.out_dir
        sys.stdout.write(emit_report(report, out_dir))
        return EXIT_OK
    except ProtocolError as e:
        print(f"protocol error: {e}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (SimulidarError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
