#!/usr/bin/env python3
"""Benchmark the compiled z-buffer kernel against the numpy fallback.

Times the raw winner-selection kernel, a full projection, and one
consistency re-rendering pass (the per-step hot path of simultaneous
sampling), and verifies both backends produce identical results.
"""

import argparse
import math
import time

import numpy as np

from simulidar.geometry import RigidTransform, translation
from simulidar.kernels import available_backends
from simulidar.projection import SensorModel, project_arrays
from simulidar.sampler import ConsistencyProjector, SamplerConfig
from simulidar.schedule import schedule_linear_scaled
from simulidar.scenes import make_synthetic_scene
from simulidar.views import ViewSet


def timeit(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=2_000_000)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = available_backends()
    if len(backends) < 2:
        print("note: compiled backend not built; timing the fallback only")

    sensor = SensorModel()
    rng = np.random.default_rng(0)
    n = args.points
    pix = rng.integers(0, sensor.h * sensor.w, size=n).astype(np.int64)
    depth = rng.uniform(1.0, 80.0, size=n)

    az = rng.uniform(-np.pi, np.pi, n)
    el = np.radians(rng.uniform(-24.9, 2.9, n))
    pts = np.stack([depth * np.cos(el) * np.cos(az),
                    depth * np.cos(el) * np.sin(az),
                    depth * np.sin(el)], axis=1)
    rem = rng.uniform(0, 255, n)

    scene = make_synthetic_scene("room", seed=0)
    poses = [RigidTransform.identity(), translation(2, 0, 0), translation(-2, 0, 0)]
    views = ViewSet.from_poses(poses)
    cfg = SamplerConfig(schedule=schedule_linear_scaled(4), delta=5.0)
    images = [scene.render(p, sensor).channels() for p in poses]

    results = {}
    rows = []
    import simulidar.kernels as kernels_pkg

    for name, impl in backends.items():
        kernels_pkg.zbuffer_argmin = impl.zbuffer_argmin
        kernels_pkg.scatter_last = impl.scatter_last

        t_kernel = timeit(lambda: impl.zbuffer_argmin(pix, depth, sensor.h * sensor.w), args.repeats)
        t_project = timeit(lambda: project_arrays(pts, rem, sensor), args.repeats)
        projector = ConsistencyProjector(views, sensor, cfg)
        t_consistency = timeit(lambda: projector(images), args.repeats)
        results[name] = (
            impl.zbuffer_argmin(pix, depth, sensor.h * sensor.w),
            project_arrays(pts, rem, sensor),
        )
        rows.append((name, t_kernel, t_project, t_consistency))

    print(f"\n{args.points:,} points, best of {args.repeats}:")
    print(f"{'backend':<10} {'zbuffer_argmin':>16} {'project':>12} {'consistency x3':>16}")
    for name, tk, tp, tc in rows:
        print(f"{name:<10} {tk * 1e3:>13.1f} ms {tp * 1e3:>9.1f} ms {tc * 1e3:>13.1f} ms")
    if len(rows) == 2:
        (_, tk0, tp0, tc0), (_, tk1, tp1, tc1) = rows
        fast, slow = (rows[1], rows[0]) if tk1 < tk0 else (rows[0], rows[1])
        print(f"\n{fast[0]} kernel speedup over {slow[0]}: "
              f"{slow[1] / fast[1]:.1f}x (kernel), {slow[2] / fast[2]:.2f}x (project), "
              f"{slow[3] / fast[3]:.2f}x (consistency)")

    if len(results) == 2:
        (w0, p0), (w1, p1) = results.values()
        assert np.array_equal(w0, w1), "backends disagree on winners"
        for a, b in zip(p0, p1):
            assert np.array_equal(a, b), "backends disagree on projection"
        print("backends agree bit-for-bit")


if __name__ == "__main__":
    main()
