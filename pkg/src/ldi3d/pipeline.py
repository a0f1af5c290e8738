"""End-to-end orchestration: disparity to glTF binary with stage timing."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imageio
from .atlas import (
    EMPTY,
    MACROBLOCK,
    PAD_COPY,
    PAD_DIFFUSE,
    build_atlas,
    encode_jpeg,
    fill_macroblocks,
    generate_charts,
    pack_charts,
    pad_charts,
    render_atlas,
)
from .config import PipelineConfig
from .depth_prep import FilterParams, merge_small_components, weighted_median_filter
from .errors import InputError
from .hallucinate import grow_occluded_geometry
from .gltf import export_glb
from .inpaint import PixelClass, diffusion_inpaint, neural_inpaint
from .ldi import Camera, DisparityImage, Ldi, lift_to_ldi
from .mesh import build_mesh
from .synth import synthetic_disparity


@dataclass
class TimingReport:
    """Wall-clock per stage; mirrors the eight pipeline rows."""

    stages: list[tuple[str, float]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, name: str, ms: float) -> None:
        self.stages.append((name, ms))

    @property
    def total_ms(self) -> float:
        return sum(ms for _, ms in self.stages)

    def to_dict(self) -> dict:
        return {
            "stages": [{"name": n, "ms": round(ms, 3)} for n, ms in self.stages],
            "total_ms": round(self.total_ms, 3),
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


class _Timer:
    def __init__(self, report: TimingReport):
        self.report = report
        self.t = time.perf_counter()

    def lap(self, name: str) -> None:
        now = time.perf_counter()
        self.report.add(name, (now - self.t) * 1000.0)
        self.t = now


@dataclass
class PipelineResult:
    glb: bytes
    report: TimingReport
    ldi: Ldi
    atlas_image: np.ndarray
    atlas_classes: np.ndarray
    mesh_triangles: int


def process_arrays(image: np.ndarray, disp: DisparityImage,
                   config: PipelineConfig = PipelineConfig(),
                   debug_dir: str | Path | None = None) -> PipelineResult:
    """Run the full pipeline on in-memory inputs.

    Stage rows: disparity_load (resampling to color resolution),
    depth_filter, component_merge, geometry_expansion, color_inpainting,
    chart_generation, chart_padding, meshing.
    """
    report = TimingReport()
    timer = _Timer(report)
    image = np.asarray(image, dtype=np.float32)
    h, w = image.shape[:2]

    if (disp.height, disp.width) != (h, w):
        disp = DisparityImage(imageio.bilinear_resize(disp.data, h, w))
    timer.lap("disparity_load")

    params = FilterParams(config.median_kernel, config.median_sigma,
                          config.step_threshold, config.min_component)
    filtered = weighted_median_filter(disp, params)
    timer.lap("depth_filter")
    cleaned = merge_small_components(filtered, params)
    timer.lap("component_merge")

    ldi = lift_to_ldi(image, cleaned, config.step_threshold)
    stats: dict = {}
    grown = grow_occluded_geometry(ldi, config.step_threshold,
                                   config.expand_iterations,
                                   config.min_curve_length, stats=stats)
    timer.lap("geometry_expansion")

    if config.inpainter == "neural":
        from .network import NetworkSpec, load_weights, build_inpaint_unet
        weights = load_weights(config.weights_path)
        spec_path = Path(config.weights_path).with_suffix(".json")
        if spec_path.exists():
            net = NetworkSpec.from_json(spec_path.read_text())
        else:
            net = build_inpaint_unet()
        filled = neural_inpaint(grown, net, weights, config.edge_margin,
                                config.step_threshold)
    else:
        filled = diffusion_inpaint(grown,
                                   iterations=config.diffusion_iterations,
                                   tol=config.diffusion_tol,
                                   edge_margin=config.edge_margin)
    timer.lap("color_inpainting")

    chart_set = generate_charts(filled, config.max_chart_size,
                                config.edge_exclusion, config.step_threshold)
    timer.lap("chart_generation")

    padded = pad_charts(chart_set, filled, config.pad_width)
    layout = pack_charts(padded)
    atlas_img, atlas_cls = render_atlas(layout, padded)
    atlas_img, atlas_cls = fill_macroblocks(atlas_img, atlas_cls)
    jpeg = encode_jpeg(atlas_img, config.jpeg_quality)
    timer.lap("chart_padding")

    camera = Camera(w, h, config.fov_deg, config.near_disp)
    mesh = build_mesh(filled, chart_set, layout, camera,
                      config.simplify_eps, config.stud_spacing)
    glb = export_glb(mesh, jpeg)
    timer.lap("meshing")

    report.meta.update({
        "image_size": [w, h],
        "ldi_pixels": int(filled.pixel_count),
        "grown_pixels": int(stats.get("new_pixels", 0)),
        "curve_groups": int(stats.get("groups", 0)),
        "charts": len(chart_set.charts),
        "atlas_size": [layout.width, layout.height],
        "mesh_vertices": int(len(mesh.positions)),
        "mesh_triangles": int(len(mesh.triangles)),
        "glb_bytes": len(glb),
        "inpainter": config.inpainter,
    })

    if debug_dir is not None:
        _dump_debug(Path(debug_dir), cleaned, filled, atlas_img, atlas_cls)

    return PipelineResult(glb, report, filled, atlas_img, atlas_cls,
                          len(mesh.triangles))


def _dump_debug(debug_dir: Path, cleaned: DisparityImage, ldi: Ldi,
                atlas_img: np.ndarray, atlas_cls: np.ndarray) -> None:
    debug_dir.mkdir(parents=True, exist_ok=True)
    imageio.save_disparity_png(debug_dir / "depth_cleaned.png", cleaned)
    imageio.save_color(debug_dir / "atlas.png", atlas_img)
    imageio.save_color(debug_dir / "atlas_classes.png",
                       _class_pseudocolor(atlas_cls))
    for i, layer_img in enumerate(_layer_stack(ldi)):
        imageio.save_color(debug_dir / f"layer_{i}.png", layer_img)


def _class_pseudocolor(cls: np.ndarray) -> np.ndarray:
    """Pseudo-color map of atlas pixel classes for inspection."""
    palette = {
        EMPTY: (0.1, 0.1, 0.1),
        0: (0.75, 0.75, 0.75),          # chart content
        PAD_COPY: (1.0, 0.6, 0.6),      # copied pad (light red)
        PAD_DIFFUSE: (0.6, 0.1, 0.1),   # diffused pad (dark red)
        MACROBLOCK: (0.3, 0.8, 0.3),    # macroblock fill (green)
    }
    out = np.zeros((*cls.shape, 3), dtype=np.float32)
    for value, color in palette.items():
        out[cls == value] = color
    return out


def _layer_stack(ldi: Ldi) -> list[np.ndarray]:
    """Per-depth-rank images of the LDI (front layer first)."""
    from .ldi import IX, IY
    pos = ldi.position_key()
    order = np.lexsort((-ldi.disparity, pos))
    prev_pos = -1
    r = 0
    ranks = np.zeros(ldi.pixel_count, dtype=np.int64)
    sorted_pos = pos[order]
    for i, p in enumerate(order):
        if sorted_pos[i] != prev_pos:
            r = 0
            prev_pos = sorted_pos[i]
        else:
            r += 1
        ranks[p] = r
    images = []
    for layer in range(int(ranks.max()) + 1):
        img = np.zeros((ldi.height, ldi.width, 3), dtype=np.float32)
        sel = np.nonzero(ranks == layer)[0]
        img[ldi.index[IY, sel], ldi.index[IX, sel]] = ldi.colors[:3, sel].T
        images.append(img)
    return images


def process(image_path: str | Path, depth_path: str | Path | None,
            out_path: str | Path, config: PipelineConfig = PipelineConfig(),
            debug_dir: str | Path | None = None,
            report_path: str | Path | None = None,
            synthetic_depth: str | None = None) -> PipelineResult:
    """File-based entry point: read inputs, write the .glb and report."""
    image = imageio.load_color(image_path)
    if synthetic_depth:
        disp = synthetic_disparity(synthetic_depth, image.shape[0],
                                   image.shape[1])
    elif depth_path is not None:
        disp = imageio.load_disparity(depth_path)
    else:
        raise InputError("a disparity input is required (no depth estimation "
                         "is performed); pass --depth or --synthetic-depth")
    result = process_arrays(image, disp, config, debug_dir)
    Path(out_path).write_bytes(result.glb)
    if report_path is not None:
        Path(report_path).write_text(result.report.to_json())
    return result
