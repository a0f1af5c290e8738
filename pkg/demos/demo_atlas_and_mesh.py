"""From a layered LDI to a packed atlas and a watertight textured mesh."""
import pathlib

from ldi3d.atlas import MACROBLOCK, build_atlas, encode_jpeg
from ldi3d.gltf import export_glb, validate_glb
from ldi3d.hallucinate import grow_occluded_geometry
from ldi3d.imageio import save_color
from ldi3d.inpaint import diffusion_inpaint
from ldi3d.ldi import Camera, lift_to_ldi
from ldi3d.mesh import build_mesh
from ldi3d.pipeline import _class_pseudocolor
from ldi3d.synth import make_scene

out = pathlib.Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

img, disp = make_scene(5, 144, 192)
ldi = lift_to_ldi(img, disp, 0.05)
grown = grow_occluded_geometry(ldi, 0.05, iterations=30)
filled = diffusion_inpaint(grown)
print(f"LDI: {filled.pixel_count} px "
      f"({filled.pixel_count - 144 * 192} hidden, inpainted)")

cs, padded, layout, atlas_img, atlas_cls, jpeg = build_atlas(filled)
print(f"charts: {len(cs.charts)}, atlas {layout.width}x{layout.height}, "
      f"JPEG {len(jpeg) / 1024:.1f} KB")

solid = atlas_img.copy()
solid[(atlas_cls == MACROBLOCK) | (atlas_cls == -1)] = 0.5
print(f"macroblock diffusion saves "
      f"{(1 - len(jpeg) / len(encode_jpeg(solid))) * 100:.1f}% JPEG size "
      "over solid fill")

save_color(out / "atlas.png", atlas_img)
save_color(out / "atlas_classes.png", _class_pseudocolor(atlas_cls))

cam = Camera(192, 144)
mesh = build_mesh(filled, cs, layout, cam)
blob = export_glb(mesh, jpeg)
(out / "scene.glb").write_bytes(blob)
issues = validate_glb(blob)
print(f"mesh: {len(mesh.positions)} vertices, {len(mesh.triangles)} triangles")
print(f"glb: {len(blob) / 1024:.1f} KB, structural issues: {issues or 'none'}")
print(f"wrote {out}/atlas*.png and {out}/scene.glb")
