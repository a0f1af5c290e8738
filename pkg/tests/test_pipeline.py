"""Pipeline orchestration, configuration round-trip, CLI surface."""
from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ldi3d import imageio
from ldi3d.config import PipelineConfig
from ldi3d.errors import InputError
from ldi3d.gltf import validate_glb
from ldi3d.pipeline import process, process_arrays
from ldi3d.synth import make_scene, synthetic_disparity

STAGE_NAMES = [
    "disparity_load", "depth_filter", "component_merge",
    "geometry_expansion", "color_inpainting", "chart_generation",
    "chart_padding", "meshing",
]


class TestConfig:
    def test_round_trip_identity(self):
        cfg = PipelineConfig(step_threshold=0.04, stud_spacing=12.0)
        text = cfg.to_json()
        again = PipelineConfig.from_json(text).to_json()
        assert text == again

    def test_bounds_enforced(self):
        with pytest.raises(InputError):
            PipelineConfig(fov_deg=5)
        with pytest.raises(InputError):
            PipelineConfig(median_kernel=4)
        with pytest.raises(InputError):
            PipelineConfig(inpainter="nearest")
        with pytest.raises(InputError):
            PipelineConfig(inpainter="neural")  # needs weights_path

    def test_unknown_key_rejected(self):
        with pytest.raises(InputError):
            PipelineConfig.from_json('{"no_such_option": 1}')


class TestPipeline:
    def test_smoke_synthetic_gradient(self):
        rng = np.random.default_rng(0)
        img = rng.random((16, 16, 3)).astype(np.float32)
        disp = synthetic_disparity("gradient", 16, 16)
        result = process_arrays(img, disp)
        assert result.mesh_triangles >= 2
        assert validate_glb(result.glb) == []
        assert [n for n, _ in result.report.stages] == STAGE_NAMES

    def test_deterministic_output(self):
        img, disp = make_scene(23, 48, 64)
        r1 = process_arrays(img, disp)
        r2 = process_arrays(img, disp)
        assert r1.glb == r2.glb

    def test_upsamples_coarse_disparity(self):
        img, _ = make_scene(3, 64, 64)
        coarse = synthetic_disparity("steps", 16, 16)
        result = process_arrays(img, coarse)
        assert result.ldi.width == 64

    def test_file_io_and_debug_dump(self, tmp_path):
        img, disp = make_scene(9, 48, 64)
        imageio.save_color(tmp_path / "in.png", img)
        imageio.save_disparity_png(tmp_path / "d.png", disp)
        result = process(tmp_path / "in.png", tmp_path / "d.png",
                         tmp_path / "out.glb",
                         debug_dir=tmp_path / "dbg",
                         report_path=tmp_path / "report.json")
        assert (tmp_path / "out.glb").stat().st_size == len(result.glb)
        report = json.loads((tmp_path / "report.json").read_text())
        assert len(report["stages"]) == 8
        assert (tmp_path / "dbg" / "depth_cleaned.png").exists()
        assert (tmp_path / "dbg" / "atlas.png").exists()
        assert (tmp_path / "dbg" / "layer_0.png").exists()

    def test_missing_depth_is_hard_error(self, tmp_path):
        img, _ = make_scene(4, 48, 64)
        imageio.save_color(tmp_path / "in.png", img)
        with pytest.raises(InputError):
            process(tmp_path / "in.png", None, tmp_path / "out.glb")

    def test_pfm_round_trip(self, tmp_path):
        _, disp = make_scene(5, 48, 64)
        imageio.save_pfm(tmp_path / "d.pfm", disp.data)
        back = imageio.load_disparity(tmp_path / "d.pfm")
        peak = disp.data.max()
        np.testing.assert_allclose(back.data, disp.data / peak, atol=1e-6)


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "ldi3d.cli", *args],
                          capture_output=True, text=True)


@pytest.fixture(scope="module")
def scene_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("scene")
    img, disp = make_scene(31, 48, 64)
    imageio.save_color(d / "photo.png", img)
    imageio.save_disparity_png(d / "photo.depth.png", disp)
    return d


class TestCli:

    def test_process_synthetic_depth(self, scene_files, tmp_path):
        out = tmp_path / "o.glb"
        r = run_cli("process", "--in", str(scene_files / "photo.png"),
                    "--synthetic-depth", "gradient", "--out", str(out),
                    "--report", str(tmp_path / "rep.json"))
        assert r.returncode == 0, r.stderr
        assert validate_glb(out.read_bytes()) == []
        rep = json.loads((tmp_path / "rep.json").read_text())
        assert [s["name"] for s in rep["stages"]] == STAGE_NAMES

    def test_process_exit_code_on_missing_input(self, tmp_path):
        r = run_cli("process", "--in", str(tmp_path / "nope.png"),
                    "--out", str(tmp_path / "o.glb"))
        assert r.returncode == 2

    def test_depth_clean(self, scene_files, tmp_path):
        out = tmp_path / "clean.png"
        r = run_cli("depth-clean", "--in", str(scene_files / "photo.depth.png"),
                    "--out", str(out))
        assert r.returncode == 0, r.stderr
        assert out.exists()

    def test_reproject(self, scene_files, tmp_path):
        out = tmp_path / "novel.png"
        r = run_cli("reproject", "--in", str(scene_files / "photo.png"),
                    "--depth", str(scene_files / "photo.depth.png"),
                    "--out", str(out), "--pose", "0.1,0,0")
        assert r.returncode == 0, r.stderr
        assert out.exists()

    def test_inpaint_eval_on_directory(self, scene_files, tmp_path):
        rep = tmp_path / "eval.json"
        r = run_cli("inpaint-eval", "--in", str(scene_files),
                    "--report", str(rep))
        assert r.returncode == 0, r.stderr
        doc = json.loads(rep.read_text())
        assert len(doc["results"]) == 1
        assert doc["reference_full_network"]["ldi_psnr_db"] == 33.852

    def test_selftest(self):
        r = run_cli("selftest", "--trials", "2")
        assert r.returncode == 0, r.stderr
        assert "selftest ok" in r.stdout
