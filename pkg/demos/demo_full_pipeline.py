"""End to end: synthetic photo + disparity in, viewable 3D photo out."""
import pathlib

from ldi3d.imageio import save_color, save_disparity_png
from ldi3d.pipeline import process_arrays
from ldi3d.synth import make_scene

out = pathlib.Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

img, disp = make_scene(12, 384, 512)
save_color(out / "pipeline_input.png", img)
save_disparity_png(out / "pipeline_depth.png", disp)

result = process_arrays(img, disp, debug_dir=out / "debug")
(out / "pipeline.glb").write_bytes(result.glb)

print(f"{'stage':<20} {'ms':>8}")
for name, ms in result.report.stages:
    print(f"{name:<20} {ms:>8.1f}")
print(f"{'total':<20} {result.report.total_ms:>8.1f}")
meta = result.report.meta
print(f"\n{meta['ldi_pixels']} LDI px ({meta['grown_pixels']} grown), "
      f"{meta['charts']} charts, atlas {meta['atlas_size']}, "
      f"{meta['mesh_triangles']} triangles, glb {meta['glb_bytes'] / 1024:.0f} KB")
print(f"wrote {out}/pipeline.glb (+ inputs and {out}/debug/ stage dumps)")
print("view it: see frontend/README.md")
