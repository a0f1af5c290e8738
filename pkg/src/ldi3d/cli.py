"""Command line interface.

Verbs: process (full pipeline), depth-clean, inpaint-eval, reproject,
bench, selftest.  Exit codes: 0 ok, 2 input error, 3 geometry error,
4 numeric error.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import imageio
from .config import PipelineConfig
from .depth_prep import FilterParams, clean_disparity
from .errors import PipelineError
from .inpaint import default_eval_pose, evaluate
from .ldi import Camera, DisparityImage, RigidPose, lift_to_ldi, reproject_splat
from .pipeline import process as run_process
from .synth import make_corpus, make_scene, synthetic_disparity


def _load_config(path: str | None, threads: int | None) -> PipelineConfig:
    cfg = (PipelineConfig.from_json(Path(path).read_text())
           if path else PipelineConfig())
    return cfg


@click.group()
def cli():
    """Single-photo 3D parallax pipeline."""


@cli.command("process")
@click.option("--in", "in_path", required=True, help="color image (PNG/JPEG)")
@click.option("--depth", "depth_path", default=None,
              help="disparity (16-bit PNG or PFM)")
@click.option("--out", "out_path", required=True, help="output .glb")
@click.option("--config", "config_path", default=None, help="config JSON")
@click.option("--debug-dir", default=None, help="write per-stage dumps here")
@click.option("--threads", default=None, type=int,
              help="thread budget hint, recorded in the report")
@click.option("--report", "report_path", default=None, help="timing JSON")
@click.option("--synthetic-depth", default=None,
              type=click.Choice(["gradient", "constant", "steps"]),
              help="generate a synthetic disparity instead of reading one")
def process_cmd(in_path, depth_path, out_path, config_path, debug_dir,
                threads, report_path, synthetic_depth):
    """Create a 3D photo: image + disparity -> textured mesh (.glb)."""
    cfg = _load_config(config_path, threads)
    result = run_process(in_path, depth_path, out_path, cfg, debug_dir,
                         report_path, synthetic_depth)
    if threads is not None:
        result.report.meta["threads"] = threads
        if report_path:
            Path(report_path).write_text(result.report.to_json())
    size_kb = len(result.glb) / 1024.0
    click.echo(f"wrote {out_path}: {size_kb:.1f} KB, "
               f"{result.mesh_triangles} triangles, "
               f"total {result.report.total_ms:.0f} ms")
    if size_kb > 1024:
        click.echo("warning: output exceeds the 1 MB budget", err=True)
    for name, ms in result.report.stages:
        click.echo(f"  {name:<20s} {ms:8.1f} ms")


@cli.command("depth-clean")
@click.option("--in", "in_path", required=True)
@click.option("--out", "out_path", required=True)
@click.option("--config", "config_path", default=None)
def depth_clean_cmd(in_path, out_path, config_path):
    """Run only the disparity cleanup stage (for debugging)."""
    cfg = _load_config(config_path, None)
    disp = imageio.load_disparity(in_path)
    params = FilterParams(cfg.median_kernel, cfg.median_sigma,
                          cfg.step_threshold, cfg.min_component)
    _, cleaned = clean_disparity(disp, params)
    imageio.save_disparity_png(out_path, cleaned)
    click.echo(f"wrote {out_path}")


@cli.command("inpaint-eval")
@click.option("--in", "in_dir", default=None,
              help="directory of <name>.png + <name>.depth.png pairs")
@click.option("--synthetic", default=0, type=int,
              help="evaluate on N built-in synthetic scenes instead")
@click.option("--pose", default=None, help="dx,dy,dz camera offset")
@click.option("--inpainter", default="diffusion",
              type=click.Choice(["diffusion", "gray", "oracle"]))
@click.option("--report", "report_path", required=True)
def inpaint_eval_cmd(in_dir, synthetic, pose, inpainter, report_path):
    """Hidden-layer inpainting quality over an image set (JSON report)."""
    scenes = []
    if synthetic:
        for i, (img, disp) in enumerate(make_corpus(synthetic)):
            scenes.append((f"synthetic_{i:02d}", img, disp))
    elif in_dir:
        root = Path(in_dir)
        for dpath in sorted(root.glob("*.depth.png")):
            stem = dpath.name[: -len(".depth.png")]
            for ext in (".png", ".jpg", ".jpeg"):
                cpath = root / (stem + ext)
                if cpath.exists():
                    scenes.append((stem, imageio.load_color(cpath),
                                   imageio.load_disparity(dpath)))
                    break
    if not scenes:
        from .errors import InputError
        raise InputError("no scenes found: pass --in DIR or --synthetic N")
    rows = []
    for name, img, disp in scenes:
        cam = Camera(disp.width, disp.height)
        rp = None
        if pose:
            dx, dy, dz = (float(v) for v in pose.split(","))
            rp = RigidPose(np.eye(3), np.array([dx, dy, dz]))
        rep = evaluate(img, disp, rp, cam, inpainter=inpainter)
        row = {"name": name, **rep.to_dict()}
        rows.append(row)
        click.echo(f"{name}: ldi_psnr={rep.ldi_psnr:.3f} "
                   f"repro_psnr={rep.reprojected_psnr:.3f} "
                   f"ssim={rep.reprojected_ssim:.4f}")
    doc = {
        "inpainter": inpainter,
        "pose": pose or "default lateral 5% of width",
        "results": rows,
        "reference_full_network": {
            "ldi_psnr_db": 33.852,
            "reprojected_psnr_db": 34.126,
            "reprojected_ssim": 0.9829,
        },
    }
    Path(report_path).write_text(json.dumps(doc, indent=2, default=str))
    click.echo(f"wrote {report_path}")


@cli.command("reproject")
@click.option("--in", "in_path", required=True)
@click.option("--depth", "depth_path", required=True)
@click.option("--out", "out_path", required=True)
@click.option("--pose", default="0.05,0,0", help="dx,dy,dz camera offset")
def reproject_cmd(in_path, depth_path, out_path, pose):
    """Splat the lifted image into a novel view and save it."""
    img = imageio.load_color(in_path)
    disp = imageio.load_disparity(depth_path)
    h, w = img.shape[:2]
    if (disp.height, disp.width) != (h, w):
        disp = DisparityImage(imageio.bilinear_resize(disp.data, h, w))
    dx, dy, dz = (float(v) for v in pose.split(","))
    ldi = lift_to_ldi(img, disp)
    cam = Camera(w, h)
    buf = reproject_splat(ldi, cam, RigidPose(np.eye(3), np.array([dx, dy, dz])))
    imageio.save_color(out_path, buf.front_image())
    click.echo(f"wrote {out_path}")


@cli.command("bench")
@click.option("--size", default="1152x1536", help="WxH of the synthetic scene")
@click.option("--threads", default=1, type=int)
@click.option("--report", "report_path", default=None)
def bench_cmd(size, threads, report_path):
    """Time the full pipeline on a synthetic scene of the given size."""
    from .pipeline import process_arrays
    w, h = (int(v) for v in size.lower().split("x"))
    img, disp = make_scene(42, h, w)
    result = process_arrays(img, disp)
    result.report.meta["threads"] = threads
    click.echo(f"{size}: total {result.report.total_ms:.0f} ms, "
               f"glb {len(result.glb) / 1024:.0f} KB")
    for name, ms in result.report.stages:
        click.echo(f"  {name:<20s} {ms:8.1f} ms")
    if report_path:
        Path(report_path).write_text(result.report.to_json())


@cli.command("selftest")
@click.option("--trials", default=5, type=int)
@click.option("--seed", default=0, type=int)
def selftest_cmd(trials, seed):
    """Graph-vs-image network equivalence check on random inputs."""
    from .network import ldi_selftest
    ok = ldi_selftest(seed=seed, trials=trials)
    if not ok:
        raise click.ClickException("equivalence selftest failed")
    click.echo("selftest ok")


def main():
    try:
        cli(standalone_mode=False)
    except PipelineError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(e.exit_code)
    except click.ClickException as e:
        e.show()
        sys.exit(2)
    except click.Abort:
        sys.exit(130)


if __name__ == "__main__":
    main()
