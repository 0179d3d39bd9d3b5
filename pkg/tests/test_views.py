import math

import numpy as np
import pytest

from simulidar.errors import GeometryError
from simulidar.geometry import PointCloud, RigidTransform, compose, relative_transform, transform_cloud, translation
from simulidar.projection import project
from simulidar.views import (
    ViewSet,
    concat_view_sets,
    fit_road_line,
    place_views_circle,
    place_views_road,
    place_views_trajectory,
    recast,
)

from conftest import random_cloud, random_pose

I = RigidTransform.identity()


class TestRecast:
    def test_no_synthetic_views(self):
        rng = np.random.default_rng(0)
        c = random_cloud(rng, 16)
        out = recast(c, ViewSet.from_poses([I]))
        assert len(out) == 1
        assert out[0] is c

    def test_translated_view(self):
        c = PointCloud([[10.0, 0, 0]], [9.0])
        views = ViewSet.from_poses([I, translation(2, 0, 0)])
        out = recast(c, views)
        np.testing.assert_allclose(out[1].points, [[8.0, 0, 0]])
        np.testing.assert_array_equal(out[1].remissions, c.remissions)

    def test_inverse_recast_recovers_input(self):
        rng = np.random.default_rng(1)
        c = random_cloud(rng, 200)
        for _ in range(20):
            pose = random_pose(rng)
            views = ViewSet.from_poses([I, pose])
            fwd = recast(c, views)[1]
            back = transform_cloud(relative_transform(I, pose), fwd)
            np.testing.assert_allclose(back.points, c.points, atol=1e-6)

    def test_preserves_pairwise_distances(self):
        rng = np.random.default_rng(2)
        c = random_cloud(rng, 50)
        pose = random_pose(rng)
        out = recast(c, ViewSet.from_poses([I, pose]))[1]
        d0 = np.linalg.norm(c.points[:, None] - c.points[None], axis=-1)
        d1 = np.linalg.norm(out.points[:, None] - out.points[None], axis=-1)
        assert np.abs(d0 - d1).max() <= 1e-6

    def test_recast_composes(self):
        # Recasting 0->k then k->m must match the direct recast 0->m.
        rng = np.random.default_rng(3)
        c = random_cloud(rng, 100)
        pk, pm = random_pose(rng), random_pose(rng)
        views = ViewSet.from_poses([I, pk, pm])
        out = recast(c, views)
        via_k = transform_cloud(relative_transform(pm, pk), out[1])
        np.testing.assert_allclose(via_k.points, out[2].points, atol=1e-6)

    def test_empty_viewset_is_error(self):
        with pytest.raises(GeometryError):
            ViewSet.from_poses([])


class TestCircle:
    def test_offsets(self):
        vs = place_views_circle(I, 5.0, 4)
        offs = np.array([p.translation[:2] for p in vs.poses[1:]])
        np.testing.assert_allclose(offs, [[5, 0], [0, 5], [-5, 0], [0, -5]], atol=1e-12)

    def test_single_view(self):
        vs = place_views_circle(I, 3.0, 1)
        assert len(vs) == 2
        np.testing.assert_allclose(vs.poses[1].translation, [3, 0, 0], atol=1e-12)

    def test_two_circles_concat(self):
        both = concat_view_sets(place_views_circle(I, 5.0, 4), place_views_circle(I, 15.0, 4))
        assert both.synthetic_count == 8
        radii = [np.linalg.norm(p.translation) for p in both.poses[1:]]
        np.testing.assert_allclose(sorted(radii), [5] * 4 + [15] * 4)

    def test_orientation_matches_center(self):
        center = compose(translation(1, 2, 0), RigidTransform.identity())
        vs = place_views_circle(center, 2.0, 3)
        for p in vs.poses:
            np.testing.assert_allclose(p.rotation, center.rotation)

    def test_bad_args(self):
        with pytest.raises(GeometryError):
            place_views_circle(I, -1.0, 4)
        with pytest.raises(GeometryError):
            place_views_circle(I, 1.0, 0)


class TestTrajectory:
    def _poses(self, n):
        return [translation(0.88 * i, 0, 0) for i in range(n)]

    def test_stride_five_count_seven(self):
        vs = place_views_trajectory(self._poses(40), 0, 5, 7)
        assert vs.synthetic_count == 7
        # Matches the published per-view spacing of about 4.4 m.
        gaps = [np.linalg.norm(vs.poses[k + 1].translation - vs.poses[k].translation) for k in range(7)]
        np.testing.assert_allclose(gaps, 4.4, atol=1e-9)

    def test_zero_stride(self):
        vs = place_views_trajectory(self._poses(5), 2, 0, 3)
        for p in vs.poses:
            np.testing.assert_allclose(p.translation, vs.poses[0].translation)

    def test_zero_count(self):
        vs = place_views_trajectory(self._poses(5), 1, 5, 0)
        assert len(vs) == 1

    def test_out_of_range(self):
        with pytest.raises(GeometryError):
            place_views_trajectory(self._poses(10), 0, 5, 7)


def corridor_ground_cloud(rng, n=2000, yaw=0.0):
    """Synthetic road band along a yawed axis, 1.7 m below the sensor."""
    along = rng.uniform(-30, 30, n)
    across = rng.uniform(-3, 3, n)
    pts = np.stack([
        along * math.cos(yaw) - across * math.sin(yaw),
        along * math.sin(yaw) + across * math.cos(yaw),
        rng.uniform(-1.9, -1.5, n),
    ], axis=1)
    return PointCloud(pts, np.full(n, 10.0))


class TestRoadPlacement:
    def test_fit_direction_on_corridor(self):
        rng = np.random.default_rng(4)
        cloud = corridor_ground_cloud(rng)
        _, direction = fit_road_line(cloud)
        angle = math.degrees(math.atan2(direction[1], direction[0]))
        assert abs(angle) < 2.0

    def test_fit_direction_yawed(self):
        rng = np.random.default_rng(5)
        cloud = corridor_ground_cloud(rng, yaw=math.radians(25))
        _, direction = fit_road_line(cloud)
        angle = math.degrees(math.atan2(direction[1], direction[0]))
        assert abs(angle - 25.0) < 2.0

    def test_progressive_offsets(self):
        rng = np.random.default_rng(6)
        cloud = corridor_ground_cloud(rng)
        vs = place_views_road(cloud, [5, -5, 10, -10, 15, -15])
        assert vs.synthetic_count == 6
        xs = [p.translation[0] for p in vs.poses[1:]]
        assert xs[0] > 0 > xs[1]
        assert abs(abs(xs[4]) - abs(xs[0])) > 5  # 15 m vs 5 m offsets

    def test_empty_offsets(self):
        rng = np.random.default_rng(7)
        vs = place_views_road(corridor_ground_cloud(rng), [])
        assert len(vs) == 1

    def test_too_few_ground_points(self):
        cloud = PointCloud([[0.0, 0, -1.7]] * 10, [0.0] * 10)
        with pytest.raises(GeometryError):
            place_views_road(cloud, [5.0])

    def test_isotropic_ground_is_degenerate(self):
        rng = np.random.default_rng(8)
        pts = np.stack([rng.uniform(-5, 5, 500), rng.uniform(-5, 5, 500), np.full(500, -1.7)], axis=1)
        with pytest.raises(GeometryError):
            place_views_road(PointCloud(pts, np.zeros(500)), [5.0])

    def test_orientation_flag(self):
        rng = np.random.default_rng(9)
        cloud = corridor_ground_cloud(rng, yaw=math.radians(30))
        aligned = place_views_road(cloud, [5.0], align_to_road=True)
        fixed = place_views_road(cloud, [5.0], align_to_road=False)
        assert not np.allclose(aligned.poses[1].rotation, np.eye(3), atol=1e-3)
        np.testing.assert_allclose(fixed.poses[1].rotation, np.eye(3))


class TestCoverageFalloff:
    def test_valid_fraction_non_increasing_with_distance(self, sensor, occluder_scene):
        scan = occluder_scene.scan(I, sensor)
        poses = [I] + [translation(d, 0, 0) for d in (5, 10, 15, 20)]
        views = ViewSet.from_poses(poses)
        fractions = [project(c, sensor).valid.mean() for c in recast(scan, views)]
        assert all(a >= b for a, b in zip(fractions[1:], fractions[2:]))
        assert fractions[1] > fractions[-1]
