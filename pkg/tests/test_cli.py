import json

import numpy as np
import pytest

from simulidar.cli import EXIT_DATA, EXIT_OK, build_parser, gap_columns, main
from simulidar.dataio import read_range_image
from simulidar.projection import SensorModel

SMALL = ["--height", "16", "--width", "128", "--steps", "8", "--scene", "room", "--deterministic"]


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def kv(out: str) -> dict:
    pairs = {}
    for line in out.strip().splitlines():
        key, _, value = line.partition("=")
        pairs[key] = value
    return pairs


class TestDensify:
    def test_condition_row_count(self, capsys):
        code, out = run_cli(capsys, "densify", "--keep-every", "4", *SMALL)
        assert code == EXIT_OK
        assert kv(out)["condition_rows"] == "4"  # 16 rows / 4

    def test_full_height_row_count(self, capsys):
        code, out = run_cli(capsys, "densify", "--keep-every", "4", "--height", "64",
                            "--width", "256", "--steps", "6", "--scene", "room", "--deterministic")
        assert code == EXIT_OK
        assert kv(out)["condition_rows"] == "16"

    def test_oracle_reaches_low_error(self, capsys):
        code, out = run_cli(capsys, "densify", *SMALL)
        pairs = kv(out)
        assert code == EXIT_OK
        assert float(pairs["metrics.depth_mae"]) <= 0.1
        assert float(pairs["metrics.generated_depth_mae"]) <= 0.1

    def test_single_vs_simultaneous_collapse(self, capsys):
        _, single = run_cli(capsys, "densify", *SMALL, "--omega", "0")
        _, multi = run_cli(capsys, "densify", *SMALL, "--omega", "0", "--placement", "none")
        assert single == multi

    def test_classical_baselines_run(self, capsys):
        for method in ("nearest", "bilinear", "bicubic"):
            code, out = run_cli(capsys, "densify", "--method", method, *SMALL)
            assert code == EXIT_OK
            assert kv(out)["method"] == method


class TestInpaint:
    def test_gap_column_arithmetic(self):
        sensor = SensorModel()
        assert gap_columns(sensor, 90.0, -72.0).sum() == 256

    def test_gap_zero_returns_condition(self, capsys):
        code, out = run_cli(capsys, "inpaint", "--gap-deg", "0", *SMALL)
        pairs = kv(out)
        assert code == EXIT_OK
        assert pairs["gap_columns"] == "0"
        assert float(pairs["metrics.depth_mae"]) <= 0.05

    def test_missing_fraction_flag(self, capsys):
        code, out = run_cli(capsys, "inpaint", "--missing-fraction", "0.3", *SMALL)
        pairs = kv(out)
        assert code == EXIT_OK
        assert float(pairs["gap_deg"]) == pytest.approx(108.0)

    def test_bad_gap_is_usage_data_error(self, capsys):
        code, _ = run_cli(capsys, "inpaint", "--gap-deg", "400", *SMALL)
        assert code == EXIT_DATA


class TestNovelView:
    def test_k0_has_near_zero_error(self, capsys):
        code, out = run_cli(capsys, "novel-view", "--stride", "2", "--count", "2", *SMALL)
        pairs = kv(out)
        assert code == EXIT_OK
        assert float(pairs["per_view.0.depth_mae"]) <= 0.05

    def test_emits_requested_view_rows(self, capsys):
        code, out = run_cli(capsys, "novel-view", "--stride", "2", "--count", "7", *SMALL)
        pairs = kv(out)
        assert code == EXIT_OK
        assert pairs["per_view.7.k"] == "7"
        assert "per_view.8.k" not in pairs


class TestSceneComplete:
    def test_basic_scoring(self, capsys):
        code, out = run_cli(capsys, "scene-complete", "--placement", "circle:2,2",
                            "--tau", "0.5", *SMALL)
        pairs = kv(out)
        assert code == EXIT_OK
        assert 0.0 <= float(pairs["metrics.f1"]) <= 100.0

    def test_simultaneous_beats_single_view_coverage(self, capsys):
        _, single = run_cli(capsys, "scene-complete", "--tau", "0.5", *SMALL)
        _, multi = run_cli(capsys, "scene-complete", "--placement", "circle:4,4",
                           "--tau", "0.5", *SMALL)
        assert float(kv(multi)["metrics.completeness"]) > float(kv(single)["metrics.completeness"])

    def test_missing_ground_truth_is_error(self, capsys, tmp_path):
        bin_path = tmp_path / "in.bin"
        bin_path.write_bytes(np.zeros((10, 4), dtype="<f4").tobytes())
        code, _ = run_cli(capsys, "scene-complete", "--input", str(bin_path),
                          "--height", "16", "--width", "128", "--steps", "4")
        assert code == EXIT_DATA


class TestRecastEval:
    def test_coverage_decreases_with_k(self, capsys):
        code, out = run_cli(capsys, "recast-eval", "--stride", "4", "--count", "4",
                            "--height", "32", "--width", "256", "--scene", "occluders")
        pairs = kv(out)
        assert code == EXIT_OK
        cov = [float(pairs[f"per_view.{k}.coverage_fraction"]) for k in range(5)]
        assert cov[0] >= cov[1] >= cov[-1]
        dist = [float(pairs[f"per_view.{k}.distance_m"]) for k in range(5)]
        assert dist == sorted(dist)


class TestSweep:
    def test_omega_axis_rows(self, capsys):
        code, out = run_cli(capsys, "sweep", "--task", "inpaint", "--axis", "omega",
                            "--values", "0,0.1,1", *SMALL)
        pairs = kv(out)
        assert code == EXIT_OK
        assert pairs["rows.0.value"] == "0"
        assert pairs["rows.2.value"] == "1"

    def test_omega_zero_row_matches_direct_run(self, capsys):
        _, sweep_out = run_cli(capsys, "sweep", "--task", "inpaint", "--axis", "omega",
                               "--values", "0", *SMALL)
        _, direct_out = run_cli(capsys, "inpaint", "--omega", "0", *SMALL)
        sweep_kv, direct_kv = kv(sweep_out), kv(direct_out)
        for key in ("depth_mae", "remission_mae"):
            assert sweep_kv[f"rows.0.metrics.{key}"] == direct_kv[f"metrics.{key}"]

    def test_delta_axis_accepts_no_limit(self, capsys):
        code, out = run_cli(capsys, "sweep", "--task", "inpaint", "--axis", "delta",
                            "--values", "0.5,5,no-limit", *SMALL)
        assert code == EXIT_OK
        assert kv(out)["rows.2.value"] == "no-limit"

    def test_views_axis_progressive(self, capsys):
        code, out = run_cli(capsys, "sweep", "--task", "inpaint", "--axis", "views",
                            "--values", "1,2", *SMALL)
        assert code == EXIT_OK

    def test_placement_axis(self, capsys):
        code, out = run_cli(capsys, "sweep", "--task", "inpaint", "--axis", "placement",
                            "--values", "circle:2,2;road:5,-5", *SMALL)
        pairs = kv(out)
        assert code == EXIT_OK
        assert pairs["rows.0.value"] == "circle:2,2"
        assert pairs["rows.1.value"] == "road:5,-5"


class TestDeterminismAndArtifacts:
    def test_same_seed_byte_identical_report(self, capsys):
        _, a = run_cli(capsys, "inpaint", *SMALL, "--seed", "5")
        _, b = run_cli(capsys, "inpaint", *SMALL, "--seed", "5")
        assert a == b

    def test_different_seed_differs(self, capsys):
        small_stochastic = [a for a in SMALL if a != "--deterministic"]
        _, a = run_cli(capsys, "inpaint", *small_stochastic, "--seed", "5")
        _, b = run_cli(capsys, "inpaint", *small_stochastic, "--seed", "6")
        assert a != b

    def test_out_dir_artifacts(self, capsys, tmp_path):
        out_dir = tmp_path / "run"
        code, out = run_cli(capsys, "densify", *SMALL, "--out-dir", str(out_dir))
        assert code == EXIT_OK
        report = json.loads((out_dir / "report.json").read_text())
        assert report["task"] == "densify"
        assert (out_dir / "report.txt").read_text() == out
        img = read_range_image(out_dir / "view00.sdri")
        assert img.shape == (16, 128)
        assert (out_dir / "view00_depth.png").exists()

    def test_unwritable_out_dir_is_data_error(self, capsys, tmp_path):
        blocker = tmp_path / "not-a-dir"
        blocker.write_text("")
        code, _ = run_cli(capsys, "densify", *SMALL, "--out-dir", str(blocker / "sub"))
        assert code == EXIT_DATA

    def test_config_file_defaults(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("[sensor]\nheight = 16\nwidth = 128\n\n[sampler]\nsteps = 4\nomega = 0\n")
        code, out = run_cli(capsys, "densify", "--scene", "room", "--deterministic",
                            "--config", str(cfg))
        pairs = kv(out)
        assert code == EXIT_OK
        assert pairs["params.height"] == "16"
        assert pairs["params.omega"] == "0.000000"

    def test_config_file_task_and_paths(self, capsys, tmp_path):
        from simulidar.dataio import write_cloud_bin
        from simulidar.geometry import RigidTransform
        from simulidar.scenes import make_synthetic_scene

        scan = tmp_path / "scan.bin"
        scene = make_synthetic_scene("room", seed=0)
        write_cloud_bin(scene.scan(RigidTransform.identity(), SensorModel(h=16, w=128)), scan)
        out_dir = tmp_path / "artifacts"
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "[sensor]\nheight = 16\nwidth = 128\n\n[sampler]\nsteps = 4\n\n"
            f"[task]\nplacement = circle:2,2\ndenoiser = zero\n\n"
            f"[paths]\ninput = {scan}\nout_dir = {out_dir}\n"
        )
        code, out = run_cli(capsys, "densify", "--deterministic", "--config", str(cfg))
        pairs = kv(out)
        assert code == EXIT_OK
        assert pairs["params.placement"] == "circle:2,2"
        assert pairs["params.denoiser"] == "zero"
        assert (out_dir / "report.json").exists()
        # Explicit flags still win over the config file.
        code2, out2 = run_cli(capsys, "densify", "--deterministic", "--config", str(cfg),
                              "--placement", "none")
        assert kv(out2)["params.placement"] == "none"

    def test_missing_input_is_data_error(self, capsys):
        code, _ = run_cli(capsys, "densify", "--steps", "4")
        assert code == EXIT_DATA

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["densify", "--unknown-flag"])
        assert exc.value.code == 2

    def test_remote_endpoint_failure_exit_code(self, capsys):
        code, _ = run_cli(capsys, "densify", *SMALL, "--denoiser", "remote:tcp:127.0.0.1:1")
        assert code == 4


class TestDatasetPoses:
    def _write_scan(self, tmp_path):
        from simulidar.dataio import write_cloud_bin
        from simulidar.geometry import RigidTransform
        from simulidar.scenes import make_synthetic_scene

        scene = make_synthetic_scene("room", seed=0)
        cloud = scene.scan(RigidTransform.identity(), SensorModel(h=16, w=128))
        path = tmp_path / "scan.bin"
        write_cloud_bin(cloud, path)
        return path

    def test_poses_addressed_by_frame_number(self, capsys, tmp_path):
        scan = self._write_scan(tmp_path)
        poses = tmp_path / "poses.txt"
        lines = [f"{i} 1 0 0 {i * 0.5:.1f} 0 1 0 0 0 0 1 0" for i in range(0, 9, 2)]
        poses.write_text("\n".join(lines) + "\n")
        code, out = run_cli(capsys, "novel-view", "--input", str(scan), "--poses", str(poses),
                            "--frame", "2", "--stride", "2", "--count", "3",
                            "--height", "16", "--width", "128", "--steps", "4",
                            "--deterministic")
        assert code == EXIT_OK
        assert kv(out)["per_view.3.label"] == "frame8"

    def test_missing_frame_is_data_error(self, capsys, tmp_path):
        scan = self._write_scan(tmp_path)
        poses = tmp_path / "poses.txt"
        poses.write_text("0 1 0 0 0 0 1 0 0 0 0 1 0\n5 1 0 0 2 0 1 0 0 0 0 1 0\n")
        code, _ = run_cli(capsys, "novel-view", "--input", str(scan), "--poses", str(poses),
                          "--frame", "0", "--stride", "1", "--count", "3",
                          "--height", "16", "--width", "128", "--steps", "4")
        assert code == EXIT_DATA


BRIDGE_MAIN = __import__("pathlib").Path(__file__).resolve().parent.parent / "bridge" / "dist" / "main.js"


class TestRemoteOracleDualPath:
    def test_cli_report_identical_through_bridge(self, capsys, tmp_path):
        # The whole densify task, run once with the in-process oracle and
        # once through the wire-protocol bridge in oracle mode, must emit
        # byte-identical reports.
        import shutil

        if shutil.which("node") is None or not BRIDGE_MAIN.exists():
            pytest.skip("bridge not built")
        from simulidar.denoisers import write_oracle_sidecar
        from simulidar.geometry import RigidTransform
        from simulidar.scenes import make_synthetic_scene
        from simulidar.schedule import schedule_linear_scaled

        sensor = SensorModel(h=16, w=128)
        scene = make_synthetic_scene("room", seed=0)
        target = scene.render(RigidTransform.identity(), sensor).channels()
        sidecar = tmp_path / "oracle.json"
        write_oracle_sidecar(sidecar, schedule_linear_scaled(8), target)

        base = ["densify", "--scene", "room", "--height", "16", "--width", "128",
                "--steps", "8", "--seed", "4"]
        _, local = run_cli(capsys, *base, "--denoiser", "oracle")
        endpoint = f"remote:stdio:node {BRIDGE_MAIN} --mode oracle --transport stdio --model-path {sidecar}"
        _, remote = run_cli(capsys, *base, "--denoiser", endpoint)
        local_kv, remote_kv = kv(local), kv(remote)
        for key in local_kv:
            if key.startswith(("metrics.", "condition_rows")):
                assert remote_kv[key] == local_kv[key], key
