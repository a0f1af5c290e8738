"""Occluded-surface growth: curves, constraints, and the layered result.

A foreground plate over a midground plate over the backdrop. The
discontinuity pixels chain into closed rings (no endpoints, so no
constraint lines); both hidden surfaces grow behind their occluders until
three layers stack up in the center.
"""
import pathlib

import numpy as np

from ldi3d.hallucinate import (
    derive_constraints,
    detect_discontinuities,
    expand,
    group_into_curves,
)
from ldi3d.imageio import save_color
from ldi3d.ldi import DisparityImage, lift_to_ldi, validate

out = pathlib.Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

h = w = 96
img = np.full((h, w, 3), 0.6, dtype=np.float32)
img[16:80, 16:80] = (0.2, 0.45, 0.7)
img[34:62, 34:62] = (0.85, 0.4, 0.3)
d = np.full((h, w), 0.15, dtype=np.float32)
d[16:80, 16:80] = 0.5
d[34:62, 34:62] = 0.85

ldi = lift_to_ldi(img, DisparityImage(d), 0.05)
print(f"lifted: {ldi.pixel_count} pixels, {ldi.connection_count()} connections")

disc = detect_discontinuities(ldi, 0.05)
groups, junctions = group_into_curves(ldi, disc, 0.05)
derive_constraints(ldi, groups, junctions)
for g in groups:
    kind = "closed ring" if g.closed else f"open ({len(g.constraints)} constraints)"
    print(f"  curve group: {len(g)} px, {kind}")

grown = expand(ldi, groups, iterations=50, step_threshold=0.05)
print(f"after growth: {grown.pixel_count} pixels "
      f"(+{grown.pixel_count - ldi.pixel_count} hidden), "
      f"validation issues: {len(validate(grown))}")

layers = np.bincount(grown.position_key())
print("layer histogram:",
      {n: int((layers == n).sum()) for n in range(1, layers.max() + 1)})

# Visualize layer count as grayscale (white = 3 layers).
img_layers = (layers.reshape(h, w) / layers.max())[..., None].repeat(3, axis=2)
save_color(out / "layer_count.png", img_layers.astype(np.float32))
print(f"wrote {out}/layer_count.png")
