"""Synthetic test scenes: color images with matching disparity maps.

The pipeline has no depth estimator, so tests and demos fabricate scenes
with known geometry.  ``make_scene`` builds a deterministic "desk corpus"
image from a seed: a smoothly textured background plus a few occluders at
distinct disparities, which is enough structure to exercise hallucination,
inpainting, atlasing and meshing.
"""
from __future__ import annotations

import numpy as np

from .errors import InputError
from .ldi import DisparityImage


def _smooth_noise(rng: np.random.Generator, h: int, w: int, scale: int) -> np.ndarray:
    """Low-frequency noise in [0, 1] via bilinear upsampling of a coarse grid."""
    ch = max(2, h // scale)
    cw = max(2, w // scale)
    coarse = rng.random((ch, cw))
    ys = np.linspace(0, ch - 1, h)
    xs = np.linspace(0, cw - 1, w)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, ch - 1)
    x1 = np.minimum(x0 + 1, cw - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = coarse[y0][:, x0] * (1 - fx) + coarse[y0][:, x1] * fx
    bot = coarse[y1][:, x0] * (1 - fx) + coarse[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def synthetic_disparity(kind: str, height: int, width: int) -> DisparityImage:
    """Simple disparity patterns for smoke tests: gradient, constant, steps."""
    if kind == "gradient":
        col = np.linspace(0.15, 0.85, height, dtype=np.float32)
        data = np.repeat(col[:, None], width, axis=1)
    elif kind == "constant":
        data = np.full((height, width), 0.5, dtype=np.float32)
    elif kind == "steps":
        data = np.full((height, width), 0.2, dtype=np.float32)
        data[:, width // 3:] = 0.5
        data[:, 2 * width // 3:] = 0.8
    else:
        raise InputError(f"unknown synthetic disparity kind {kind!r}")
    return DisparityImage(data)


def make_scene(seed: int, height: int = 192, width: int = 256,
               stacked: bool = False) -> tuple[np.ndarray, DisparityImage]:
    """Deterministic synthetic scene with occluders.

    Args:
        seed: RNG seed; same seed gives the same scene.
        stacked: force two nested occluders close together so that growth
            produces more than two layers at some positions.

    Returns:
        (image, disparity): float32 (H, W, 3) in [0, 1] and the disparity map.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width]

    # Background: far, gently sloped, soft texture.
    bg_base = 0.08 + 0.10 * rng.random()
    disp = bg_base + 0.04 * (yy / height) + 0.015 * _smooth_noise(rng, height, width, 64)
    hue = rng.random(3) * 0.5 + 0.25
    img = np.empty((height, width, 3), dtype=np.float64)
    tex = _smooth_noise(rng, height, width, 24)
    for c in range(3):
        img[..., c] = np.clip(hue[c] * 0.8 + 0.35 * tex + 0.08 *
                              _smooth_noise(rng, height, width, 8), 0, 1)

    def paint(mask: np.ndarray, d: float, color: np.ndarray):
        disp[mask] = d
        detail = _smooth_noise(rng, height, width, 16)
        for c in range(3):
            ch = img[..., c]
            ch[mask] = np.clip(color[c] + 0.3 * detail[mask] - 0.15, 0, 1)

    n_shapes = 4 + int(rng.integers(0, 3))
    depths = np.sort(rng.uniform(0.3, 0.92, n_shapes))
    for i in range(n_shapes):
        kind = rng.integers(0, 2)
        cx = rng.uniform(0.18, 0.82) * width
        cy = rng.uniform(0.18, 0.82) * height
        if kind == 0:
            rx = rng.uniform(0.08, 0.22) * width
            ry = rng.uniform(0.08, 0.22) * height
            mask = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
        else:
            hw = rng.uniform(0.07, 0.18) * width
            hh = rng.uniform(0.07, 0.18) * height
            mask = (np.abs(xx - cx) <= hw) & (np.abs(yy - cy) <= hh)
        paint(mask, float(depths[i]), rng.random(3) * 0.85 + 0.08)

    if stacked:
        cx, cy = width * 0.5, height * 0.5
        outer = (np.abs(xx - cx) <= width * 0.22) & (np.abs(yy - cy) <= height * 0.26)
        inner = (np.abs(xx - cx) <= width * 0.09) & (np.abs(yy - cy) <= height * 0.12)
        paint(outer, 0.55, np.array([0.25, 0.5, 0.7]))
        paint(inner, 0.92, np.array([0.85, 0.4, 0.3]))

    disp = np.clip(disp, 0.0, 1.0).astype(np.float32)
    return img.astype(np.float32), DisparityImage(disp)


def make_corpus(n: int = 20, height: int = 192, width: int = 256
                ) -> list[tuple[np.ndarray, DisparityImage]]:
    """The fixed 20-image desk corpus used by evaluation-style tests.

    Image 0 always has stacked occluders so at least one scene can grow
    more than two layers at a position.
    """
    return [make_scene(1000 + i, height, width, stacked=(i == 0)) for i in range(n)]
