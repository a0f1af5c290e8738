"""Texture atlas: flatten the LDI into charts, pad them, pack them.

Charts are grown by breadth-first flood fill along pixel connections under
three constraints: a chart never covers one lattice position twice (no
fold-over), its bounding box stays under a size cap, and pixels just
across a silhouette from a front-side member are reserved for a separate
chart so texture filtering cannot mix surfaces.  Packed charts get a
copied-or-diffused pad ring, and every JPEG macroblock a chart touches is
diffusion-filled to keep block edges invisible to the encoder.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import InputError
from .inpaint import PixelClass
from .ldi import (
    DIR_OFFSET,
    DIR_ROW,
    DIRECTIONS,
    IX, IY,
    Ldi,
)

# Atlas per-pixel classes (beyond the LDI pixel classes).
EMPTY = -1
CHART = int(PixelClass.KNOWN)
PAD_COPY = int(PixelClass.PADDING_INTERIOR)
PAD_DIFFUSE = int(PixelClass.PADDING_SILHOUETTE)
MACROBLOCK = int(PixelClass.MACROBLOCK)

_DIR_LIST = [(name, DIR_OFFSET[name], DIR_ROW[name]) for name in DIRECTIONS]


@dataclass
class Chart:
    """A fold-free connected set of LDI pixels with its lattice bbox."""

    id: int
    pixels: np.ndarray  # LDI pixel indices in acceptance order
    x0: int
    y0: int
    x1: int  # inclusive
    y1: int

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    def local_grid(self, ldi: Ldi) -> np.ndarray:
        """(h, w) lattice raster of member pixel indices, -1 where absent."""
        grid = np.full((self.height, self.width), -1, dtype=np.int64)
        xs = ldi.index[IX, self.pixels] - self.x0
        ys = ldi.index[IY, self.pixels] - self.y0
        grid[ys, xs] = self.pixels
        return grid


@dataclass
class ChartSet:
    charts: list[Chart]
    chart_of: np.ndarray  # (K,) chart id per LDI pixel


def front_side_directions(ldi: Ldi, step_threshold: float) -> np.ndarray:
    """Bitmask per pixel: directions where it fronts a depth edge.

    Bit i is set when the pixel misses neighbor i and some pixel at the
    adjacent position is farther by more than the threshold.
    """
    k = ldi.pixel_count
    xs = ldi.index[IX].astype(np.int64)
    ys = ldi.index[IY].astype(np.int64)
    d = ldi.disparity.astype(np.float64)
    w, h = ldi.width, ldi.height

    # min disparity per lattice position
    from .ldi import per_cell_extreme
    pos = ys * w + xs
    min_d = per_cell_extreme(pos, d, w * h, "min", np.inf)

    out = np.zeros(k, dtype=np.uint8)
    for bit, (name, (dx, dy), row) in enumerate(_DIR_LIST):
        missing = ldi.index[row] < 0
        nx = xs + dx
        ny = ys + dy
        inside = (nx >= 0) & (nx < w) & (ny >= 0) & (ny < h)
        sel = missing & inside
        npos = (ny * w + nx)[sel]
        farther = min_d[npos] < d[sel] - step_threshold
        hit = np.nonzero(sel)[0][farther]
        out[hit] |= np.uint8(1 << bit)
    return out


def generate_charts(ldi: Ldi, max_size: int = 256, edge_exclusion: int = 4,
                    step_threshold: float = 0.05) -> ChartSet:
    """Partition the LDI into charts by seeded breadth-first flood fill.

    Seeds follow scanline order (y, x, layer insertion order).  Every pixel
    lands in exactly one chart; pixels excluded near an edge seed their own
    charts later.
    """
    from ._kernels import chart_flood_kernel

    k = ldi.pixel_count
    w, h = ldi.width, ldi.height
    xs = ldi.index[IX].astype(np.int64)
    ys = ldi.index[IY].astype(np.int64)
    pos = ys * w + xs
    nbr = np.stack([ldi.index[row] for _, _, row in _DIR_LIST]).astype(np.int64)
    front_dirs = front_side_directions(ldi, step_threshold)
    # scanline order (y, x, insertion): one packed key sorts faster than
    # a three-key lexsort at this size
    order = np.argsort(pos * k + np.arange(k), kind="stable")

    owned, rank = chart_flood_kernel(nbr, xs, ys, pos, front_dirs, order,
                                     w, h, max_size, edge_exclusion)

    n_charts = int(owned.max()) + 1 if k else 0
    by_chart = np.argsort(owned.astype(np.int64) * k + rank, kind="stable")
    starts = np.searchsorted(owned[by_chart], np.arange(n_charts + 1))
    charts: list[Chart] = []
    for cid in range(n_charts):
        members = by_chart[starts[cid]:starts[cid + 1]]
        charts.append(Chart(cid, members,
                            int(xs[members].min()), int(ys[members].min()),
                            int(xs[members].max()), int(ys[members].max())))
    return ChartSet(charts, owned)


@dataclass
class PaddedChart:
    chart: Chart
    pad: int
    colors: np.ndarray   # (h + 2p, w + 2p, 3) float32
    classes: np.ndarray  # (h + 2p, w + 2p) int8, EMPTY outside

    @property
    def width(self) -> int:
        return self.colors.shape[1]

    @property
    def height(self) -> int:
        return self.colors.shape[0]


def pad_charts(chart_set: ChartSet, ldi: Ldi, pad: int = 4) -> list[PaddedChart]:
    """Surround each chart with a pad ring for texture filtering.

    Pad texels reachable through LDI connections copy the connected pixels'
    colors exactly (they belong to neighboring charts of the same surface);
    the rest of the ring, across silhouettes, is filled by isotropic
    diffusion from the chart content.
    """
    xs = ldi.index[IX]
    ys = ldi.index[IY]
    nbr = np.stack([ldi.index[row] for _, _, row in _DIR_LIST])
    colors = ldi.colors
    out: list[PaddedChart] = []

    for chart in chart_set.charts:
        ph = chart.height + 2 * pad
        pw = chart.width + 2 * pad
        img = np.zeros((ph, pw, 3), dtype=np.float32)
        cls = np.full((ph, pw), EMPTY, dtype=np.int8)

        lx = xs[chart.pixels] - chart.x0 + pad
        ly = ys[chart.pixels] - chart.y0 + pad
        img[ly, lx] = colors[:, chart.pixels].T
        cls[ly, lx] = CHART

        # Copy pass: BFS outward along connections, first write wins
        # (pixel-major, direction-minor order, matching a sequential walk).
        written = np.zeros((ph, pw), dtype=bool)
        written[ly, lx] = True
        fp = chart.pixels.astype(np.int64)
        fy = ly.astype(np.int64)
        fx = lx.astype(np.int64)
        # Only boundary members can write anything in the first round.
        interior = (written[np.minimum(fy + 1, ph - 1), fx]
                    & written[np.maximum(fy - 1, 0), fx]
                    & written[fy, np.minimum(fx + 1, pw - 1)]
                    & written[fy, np.maximum(fx - 1, 0)])
        fp, fy, fx = fp[~interior], fy[~interior], fx[~interior]
        for _ in range(pad):
            if len(fp) == 0:
                break
            qs = nbr[:, fp]                              # (4, n)
            ty = fy[None, :] + np.array([[o[1][1]] for o in _DIR_LIST])
            tx = fx[None, :] + np.array([[o[1][0]] for o in _DIR_LIST])
            ok = (qs >= 0) & (tx >= 0) & (tx < pw) & (ty >= 0) & (ty < ph)
            # candidate order: pixel-major then direction
            qs_f = qs.T.ravel()
            ty_f = ty.T.ravel()
            tx_f = tx.T.ravel()
            ok_f = ok.T.ravel()
            qs_f, ty_f, tx_f = qs_f[ok_f], ty_f[ok_f], tx_f[ok_f]
            if len(qs_f) == 0:
                break
            unwritten = ~written[ty_f, tx_f]
            qs_f, ty_f, tx_f = qs_f[unwritten], ty_f[unwritten], tx_f[unwritten]
            cellkey = ty_f * pw + tx_f
            order = np.lexsort((np.arange(len(cellkey)), cellkey))
            sk = cellkey[order]
            keep = np.ones(len(sk), dtype=bool)
            keep[1:] = sk[1:] != sk[:-1]
            sel = np.sort(order[keep])
            qs_f, ty_f, tx_f = qs_f[sel], ty_f[sel], tx_f[sel]
            written[ty_f, tx_f] = True
            img[ty_f, tx_f] = colors[:, qs_f].T
            cls[ty_f, tx_f] = PAD_COPY
            fp, fy, fx = qs_f, ty_f, tx_f

        # Diffusion pass for the remaining ring within pad distance.
        member_mask = cls == CHART
        ring = _chebyshev_within(member_mask, pad) & (cls == EMPTY)
        if ring.any():
            cls[ring] = PAD_DIFFUSE
            img = _raster_diffuse(img, known=(cls == CHART) | (cls == PAD_COPY),
                                  fill=ring)
        out.append(PaddedChart(chart, pad, img, cls))
    return out


def _chebyshev_within(mask: np.ndarray, radius: int) -> np.ndarray:
    """Positions within Chebyshev distance <= radius of any set pixel."""
    out = mask.copy()
    for _ in range(radius):
        grown = out.copy()
        grown[1:, :] |= out[:-1, :]
        grown[:-1, :] |= out[1:, :]
        grown[:, 1:] |= out[:, :-1]
        grown[:, :-1] |= out[:, 1:]
        grown[1:, 1:] |= out[:-1, :-1]
        grown[1:, :-1] |= out[:-1, 1:]
        grown[:-1, 1:] |= out[1:, :-1]
        grown[:-1, :-1] |= out[1:, 1:]
        out = grown
    return out


def _raster_diffuse(img: np.ndarray, known: np.ndarray, fill: np.ndarray,
                    iterations: int = 40, tol: float = 1e-4) -> np.ndarray:
    """Jacobi diffusion of colors into ``fill`` pixels on a raster.

    The fill ring is thin (pad width), so a warm start from the mean plus
    a couple hundred sweeps converges well below visible error.  Neighbors
    outside known+fill are ignored; isolated fill pixels keep the mean.
    """
    h, w = known.shape
    live = known | fill
    img = img.copy()
    mean = img[known].mean(axis=0) if known.any() else np.full(3, 0.5)
    img[fill] = mean

    ys, xs = np.nonzero(fill)
    if len(ys) == 0:
        return img
    # Per fill pixel: flat index of each live neighbor (self-loop when absent).
    flat = img.reshape(-1, 3)
    self_idx = ys * w + xs
    nbr_idx = []
    weights = np.zeros(len(ys), dtype=np.float32)
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        ny, nx = ys + dy, xs + dx
        ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
        ok[ok] = live[ny[ok], nx[ok]]
        weights += ok
        nbr_idx.append(np.where(ok, ny * w + nx, self_idx))
    counts = np.maximum(weights, 1.0)[:, None]
    dead = weights == 0  # keep the mean; self-loops would zero them out

    # Warm start: onion-peel mean of already-settled neighbors, so the
    # Jacobi polish below starts close to harmonic.
    settled = known.reshape(-1).copy()
    for _ in range(8):
        s = (settled[nbr_idx[0]].astype(np.float32)
             + settled[nbr_idx[1]] + settled[nbr_idx[2]] + settled[nbr_idx[3]])
        grab = (~settled[self_idx]) & (s > 0)
        if not grab.any():
            break
        acc = np.zeros((len(ys), 3), dtype=np.float32)
        for ni in nbr_idx:
            acc += flat[ni] * settled[ni][:, None]
        flat[self_idx[grab]] = acc[grab] / s[grab, None]
        settled[self_idx[grab]] = True

    for _ in range(iterations):
        acc = (flat[nbr_idx[0]] + flat[nbr_idx[1]]
               + flat[nbr_idx[2]] + flat[nbr_idx[3]])
        acc -= flat[self_idx] * (4.0 - counts)
        new = acc / counts
        new[dead] = flat[self_idx][dead]
        delta = np.abs(new - flat[self_idx]).max()
        flat[self_idx] = new
        if delta < tol:
            break
    return img


@dataclass
class AtlasLayout:
    width: int
    height: int
    pad: int
    placements: dict[int, tuple[int, int]]  # chart id -> padded rect origin

    def to_json(self) -> str:
        return json.dumps({
            "width": self.width, "height": self.height, "pad": self.pad,
            "placements": {str(k): list(v)
                           for k, v in sorted(self.placements.items())},
            "growth_policy": "double smaller dimension until all charts fit",
        }, sort_keys=True)


class _Node:
    __slots__ = ("x", "y", "w", "h", "used", "child")

    def __init__(self, x, y, w, h):
        self.x, self.y, self.w, self.h = x, y, w, h
        self.used = False
        self.child = None

    def insert(self, rw, rh):
        if self.child is not None:
            return self.child[0].insert(rw, rh) or self.child[1].insert(rw, rh)
        if self.used or rw > self.w or rh > self.h:
            return None
        if rw == self.w and rh == self.h:
            self.used = True
            return (self.x, self.y)
        dw, dh = self.w - rw, self.h - rh
        if dw > dh:
            self.child = (_Node(self.x, self.y, rw, self.h),
                          _Node(self.x + rw, self.y, dw, self.h))
        else:
            self.child = (_Node(self.x, self.y, self.w, rh),
                          _Node(self.x, self.y + rh, self.w, dh))
        return self.child[0].insert(rw, rh)


def _next16(v: int) -> int:
    """Next multiple of 16 strictly greater than v."""
    return (v // 16 + 1) * 16


def pack_charts(padded: list[PaddedChart], max_atlas: int = 16384) -> AtlasLayout:
    """Tree-based bin packing; grows by doubling the smaller dimension.

    Insertion order is by descending height, ties by ascending chart id,
    which makes the layout a pure function of the chart list.
    """
    if not padded:
        return AtlasLayout(16, 16, 0, {})
    for pc in padded:
        if pc.width > max_atlas or pc.height > max_atlas:
            raise InputError(f"chart {pc.chart.id} ({pc.width}x{pc.height}) "
                             f"exceeds the atlas limit {max_atlas}")
    order = sorted(padded, key=lambda pc: (-pc.height, pc.chart.id))
    aw = _next16(max(pc.width for pc in padded))
    ah = _next16(max(pc.height for pc in padded))

    while True:
        root = _Node(0, 0, aw, ah)
        placements: dict[int, tuple[int, int]] = {}
        ok = True
        for pc in order:
            spot = root.insert(pc.width, pc.height)
            if spot is None:
                ok = False
                break
            placements[pc.chart.id] = spot
        if ok:
            return AtlasLayout(aw, ah, padded[0].pad, placements)
        if aw > max_atlas or ah > max_atlas:
            raise InputError("charts do not fit the maximum atlas size")
        if aw <= ah:
            aw *= 2
        else:
            ah *= 2


def render_atlas(layout: AtlasLayout, padded: list[PaddedChart]
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Compose the atlas image and its class map from packed charts."""
    img = np.zeros((layout.height, layout.width, 3), dtype=np.float32)
    cls = np.full((layout.height, layout.width), EMPTY, dtype=np.int8)
    for pc in padded:
        ox, oy = layout.placements[pc.chart.id]
        region = pc.classes != EMPTY
        dst_img = img[oy:oy + pc.height, ox:ox + pc.width]
        dst_cls = cls[oy:oy + pc.height, ox:ox + pc.width]
        dst_img[region] = pc.colors[region]
        dst_cls[region] = pc.classes[region]
    return img, cls


def fill_macroblocks(img: np.ndarray, cls: np.ndarray, block: int = 16,
                     gray: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Diffusion-fill every undefined pixel of blocks a chart overlaps.

    Untouched blocks become mid-gray and keep the EMPTY class.  Returns a
    new (image, classes) pair.
    """
    h, w = cls.shape
    if h % block or w % block:
        raise InputError("atlas dimensions must be multiples of the block size")
    img = img.copy()
    cls = cls.copy()
    bh, bw = h // block, w // block
    blocks_cls = cls.reshape(bh, block, bw, block).transpose(0, 2, 1, 3)
    overlapped = (blocks_cls != EMPTY).any(axis=(2, 3))
    has_empty = (blocks_cls == EMPTY).any(axis=(2, 3))

    # Stack the blocks that need diffusion and iterate jointly.
    byx = np.argwhere(overlapped & has_empty)
    if len(byx):
        img_blocks = img.reshape(bh, block, bw, block, 3).transpose(0, 2, 1, 3, 4)
        cls_blocks = cls.reshape(bh, block, bw, block).transpose(0, 2, 1, 3)
        stack = img_blocks[byx[:, 0], byx[:, 1]].copy()
        known = cls_blocks[byx[:, 0], byx[:, 1]] != EMPTY
        fill = ~known
        means = np.array([s[k].mean(axis=0) if k.any() else [gray] * 3
                          for s, k in zip(stack, known)], dtype=np.float32)
        for b in range(len(stack)):
            stack[b][fill[b]] = means[b]

        # Onion-peel init from settled pixels, then Jacobi polish.
        settled = known.copy()
        for _ in range(16):
            s = np.zeros(known.shape, dtype=np.float32)
            acc = np.zeros_like(stack)
            s[:, 1:] += settled[:, :-1]
            acc[:, 1:] += stack[:, :-1] * settled[:, :-1, :, None]
            s[:, :-1] += settled[:, 1:]
            acc[:, :-1] += stack[:, 1:] * settled[:, 1:, :, None]
            s[:, :, 1:] += settled[:, :, :-1]
            acc[:, :, 1:] += stack[:, :, :-1] * settled[:, :, :-1, None]
            s[:, :, :-1] += settled[:, :, 1:]
            acc[:, :, :-1] += stack[:, :, 1:] * settled[:, :, 1:, None]
            grab = (~settled) & (s > 0)
            if not grab.any():
                break
            stack[grab] = acc[grab] / s[grab, None]
            settled |= grab

        for _ in range(24):
            acc = np.zeros_like(stack)
            cnt = np.zeros(known.shape, dtype=np.float32)
            acc[:, 1:] += stack[:, :-1]
            cnt[:, 1:] += 1
            acc[:, :-1] += stack[:, 1:]
            cnt[:, :-1] += 1
            acc[:, :, 1:] += stack[:, :, :-1]
            cnt[:, :, 1:] += 1
            acc[:, :, :-1] += stack[:, :, 1:]
            cnt[:, :, :-1] += 1
            new = acc / cnt[..., None]
            delta = np.abs(new[fill] - stack[fill]).max() if fill.any() else 0.0
            stack[fill] = new[fill]
            if delta < 5e-5:
                break
        for (by, bx), s, f in zip(byx, stack, fill):
            ys, xs_ = np.nonzero(f)
            img[by * block + ys, bx * block + xs_] = s[ys, xs_]
            cls[by * block + ys, bx * block + xs_] = MACROBLOCK

    untouched = ~overlapped
    for by, bx in np.argwhere(untouched):
        img[by * block:(by + 1) * block, bx * block:(bx + 1) * block] = gray
    return img, cls


def encode_jpeg(img: np.ndarray, quality: int = 90) -> bytes:
    """Baseline JPEG, 4:2:0 subsampling."""
    arr = (np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="JPEG", quality=quality,
                              subsampling=2)
    return buf.getvalue()


def build_atlas(ldi: Ldi, max_size: int = 256, edge_exclusion: int = 4,
                pad: int = 4, step_threshold: float = 0.05,
                jpeg_quality: int = 90):
    """Full texture stage: charts, pads, packing, macroblocks, JPEG bytes.

    Returns (chart_set, padded, layout, image, classes, jpeg_bytes).
    """
    chart_set = generate_charts(ldi, max_size, edge_exclusion, step_threshold)
    padded = pad_charts(chart_set, ldi, pad)
    layout = pack_charts(padded)
    img, cls = render_atlas(layout, padded)
    img, cls = fill_macroblocks(img, cls)
    return chart_set, padded, layout, img, cls, encode_jpeg(img, jpeg_quality)
