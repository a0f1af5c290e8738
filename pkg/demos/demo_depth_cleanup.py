"""Depth cleanup walkthrough: sharpen a soft edge, absorb a stray blob.

Learned disparity washes discontinuities out over several pixels. Watch the
weighted median snap a blurred step back to a hard edge, and the component
pass remove an isolated mid-depth fragment.
"""
import pathlib

import numpy as np

from ldi3d.depth_prep import FilterParams, merge_small_components, weighted_median_filter
from ldi3d.imageio import save_disparity_png
from ldi3d.ldi import DisparityImage

out = pathlib.Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

# A step edge, washed out over 2 px like a depth network would produce...
h, w = 96, 128
d = np.full((h, w), 0.2, dtype=np.float32)
d[:, w // 2:] = 0.8
d[:, w // 2 - 1] = 0.4
d[:, w // 2] = 0.6
# ...plus a 12-pixel mid-depth speck the network hallucinated.
d[40:43, 30:34] = 0.5

save_disparity_png(out / "cleanup_raw.png", DisparityImage(d))

params = FilterParams()
filtered = weighted_median_filter(DisparityImage(d), params)
save_disparity_png(out / "cleanup_filtered.png", filtered)

print("edge profile before:", np.round(d[h // 2, w // 2 - 5: w // 2 + 5], 2))
ramp_cols = filtered.data[h // 2, w // 2 - 5: w // 2 + 5]
print("edge profile after: ", np.round(ramp_cols, 2))
uniq = np.unique(np.round(ramp_cols, 3))
print(f"-> the ramp collapses to a hard 0.2 | 0.8 step "
      f"({len(uniq)} distinct values: {uniq})")

cleaned = merge_small_components(filtered, params)
save_disparity_png(out / "cleanup_merged.png", cleaned)
blob = cleaned.data[40:43, 30:34]
print("speck region after merging:", np.unique(np.round(blob, 2)),
      "(absorbed into its surroundings)")
print(f"wrote {out}/cleanup_*.png")
