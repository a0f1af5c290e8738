"""2D network operators mapped onto LDI connectivity.

Convolutions aggregate their kernel windows by breadth-first traversal of
the pixel connections (up / down / left / right order, first visit wins),
so a network trained on plain images runs unchanged on a multi-layer LDI.
Unreachable kernel slots are treated as masked out, which yields partial
convolution semantics at silhouettes and image borders alike.

All operators share immutable ``IndexGrid`` connectivity structures; value
tensors at one scale reference the same grid.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericError, WeightLoadError
from .ldi import DIR_ROW, IX, IY, Ldi

# Traversal priority order; offsets in (dx, dy).
_DIRS = (("up", 0, -1), ("down", 0, 1), ("left", -1, 0), ("right", 1, 0))


class IndexGrid:
    """Connectivity of an LDI at one scale: coordinates plus 4-neighbors.

    ``nbr`` rows follow the traversal order (up, down, left, right); -1
    means no neighbor.  ``disp`` carries per-pixel disparity so coarser
    grids built from this one keep it available.
    """

    def __init__(self, coords: np.ndarray, nbr: np.ndarray, width: int,
                 height: int, disp: np.ndarray | None = None):
        self.coords = np.asarray(coords, dtype=np.int32)
        self.nbr = np.asarray(nbr, dtype=np.int32)
        self.width = int(width)
        self.height = int(height)
        self.disp = None if disp is None else np.asarray(disp, dtype=np.float32)
        for a in (self.coords, self.nbr):
            a.flags.writeable = False
        self._cache: dict = {}

    @property
    def pixel_count(self) -> int:
        return self.coords.shape[1]

    @classmethod
    def from_ldi(cls, ldi: Ldi) -> "IndexGrid":
        nbr = np.stack([ldi.index[DIR_ROW[name]] for name, _, _ in _DIRS])
        return cls(ldi.index[:2], nbr, ldi.width, ldi.height, ldi.disparity)

    @classmethod
    def full_grid(cls, width: int, height: int) -> "IndexGrid":
        """Fully connected single-layer lattice (the plain-image case)."""
        k = width * height
        ids = np.arange(k, dtype=np.int32).reshape(height, width)
        ys, xs = np.divmod(np.arange(k, dtype=np.int32), np.int32(width))
        nbr = np.full((4, k), -1, dtype=np.int32)
        nbr[0, ids[1:, :].ravel()] = ids[:-1, :].ravel()   # up
        nbr[1, ids[:-1, :].ravel()] = ids[1:, :].ravel()   # down
        nbr[2, ids[:, 1:].ravel()] = ids[:, :-1].ravel()   # left
        nbr[3, ids[:, :-1].ravel()] = ids[:, 1:].ravel()   # right
        return cls(np.stack([xs, ys]), nbr, width, height)


@dataclass
class LdiTensor:
    """A (C, K) float32 value table bound to an IndexGrid."""

    values: np.ndarray
    grid: IndexGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim == 1:
            self.values = self.values[None, :]
        if self.values.shape[1] != self.grid.pixel_count:
            raise InputError(
                f"tensor has {self.values.shape[1]} pixels, grid has "
                f"{self.grid.pixel_count}")

    @property
    def channels(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class KernelSpec:
    """Convolution layer geometry and parameters."""

    kernel: int
    stride: int
    in_channels: int
    out_channels: int
    weight: np.ndarray  # (out, in, k, k)
    bias: np.ndarray    # (out,)

    def __post_init__(self):
        if self.kernel not in (3, 5, 7):
            raise InputError(f"kernel size {self.kernel} not in (3, 5, 7)")
        if self.stride not in (1, 2):
            raise InputError(f"stride {self.stride} not in (1, 2)")
        w = np.asarray(self.weight, dtype=np.float32)
        b = np.asarray(self.bias, dtype=np.float32)
        expect = (self.out_channels, self.in_channels, self.kernel, self.kernel)
        if w.shape != expect:
            raise InputError(f"weight shape {w.shape} != {expect}")
        if b.shape != (self.out_channels,):
            raise InputError(f"bias shape {b.shape} != ({self.out_channels},)")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)


def gather_all(grid: IndexGrid, kernel: int) -> np.ndarray:
    """BFS kernel aggregation for every pixel at once.

    Returns (K, kernel*kernel) int32: the pixel occupying each kernel slot,
    -1 where no connection path reaches the slot.  Slot (dx, dy) is indexed
    (dy+r)*kernel + (dx+r).  Traversal explores up/down/left/right from
    each queued pixel; a slot is filled by the first path that reaches it,
    with ties resolved by queue order then direction order.
    """
    cached = grid._cache.get(("gather", kernel))
    if cached is not None:
        return cached
    k = kernel
    r = k // 2
    kk = k * k
    n = grid.pixel_count
    nbr = grid.nbr

    slot_pixel = np.full((n, kk), -1, dtype=np.int64)
    slot_rank = np.zeros((n, kk), dtype=np.int32)
    fill_wave = np.full((n, kk), -1, dtype=np.int16)
    center = r * k + r
    slot_pixel[:, center] = np.arange(n)
    fill_wave[:, center] = 0

    # Slot-space moves for each direction, with row-wrap guards.
    moves = []
    for di, (_, dx, dy) in enumerate(_DIRS):
        moves.append((di, dx + dy * k, dx, dy))

    wave = 0
    while True:
        any_new = False
        best_prio = {}
        best_pix = {}
        for s in range(kk):
            src_active = fill_wave[:, s] == wave
            if not src_active.any():
                continue
            sx, sy = s % k, s // k
            parents = slot_pixel[src_active, s]
            ranks = slot_rank[src_active, s]
            rows = np.nonzero(src_active)[0]
            for di, ds, dx, dy in moves:
                tx, ty = sx + dx, sy + dy
                if tx < 0 or tx >= k or ty < 0 or ty >= k:
                    continue
                t = s + ds
                q = nbr[di, parents]
                ok = (q >= 0) & (slot_pixel[rows, t] == -1)
                if not ok.any():
                    continue
                rr = rows[ok]
                prio = ranks[ok].astype(np.int64) * 4 + di
                if t not in best_prio:
                    best_prio[t] = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
                    best_pix[t] = np.full(n, -1, dtype=np.int64)
                better = prio < best_prio[t][rr]
                upd = rr[better]
                best_prio[t][upd] = prio[better]
                best_pix[t][upd] = q[ok][better]

        if not best_prio:
            break
        new_slots = sorted(best_prio)
        prio_matrix = np.stack([best_prio[t] for t in new_slots], axis=1)
        filled = prio_matrix < np.iinfo(np.int64).max
        if filled.any():
            any_new = True
            order = np.argsort(prio_matrix, axis=1, kind="stable")
            ranks_new = np.empty_like(order)
            m = len(new_slots)
            np.put_along_axis(ranks_new, order,
                              np.broadcast_to(np.arange(m), (n, m)).copy(), axis=1)
            for j, t in enumerate(new_slots):
                rowsel = filled[:, j]
                slot_pixel[rowsel, t] = best_pix[t][rowsel]
                slot_rank[rowsel, t] = ranks_new[rowsel, j]
                fill_wave[rowsel, t] = wave + 1
        if not any_new:
            break
        wave += 1

    out = slot_pixel.astype(np.int32)
    out.flags.writeable = False
    grid._cache[("gather", kernel)] = out
    return out


def gather_kernel(grid: IndexGrid, center: int, kernel: int) -> np.ndarray:
    """Kernel slots for one pixel as a (k, k) table of pixel indices (-1 empty)."""
    return gather_all(grid, kernel)[center].reshape(kernel, kernel).copy()


@dataclass
class ScaleMap:
    """Fine-to-coarse structure for one downscale level.

    ``retained``: fine pixel index per coarse pixel (even-coordinate pixels,
    ascending).  ``assignment``: coarse pixel per fine pixel (-1 when no
    1- or 2-step connection path reaches the block anchor).
    """

    fine: IndexGrid
    coarse: IndexGrid
    retained: np.ndarray
    assignment: np.ndarray


def ldi_downscale(grid: IndexGrid) -> ScaleMap:
    """Halve the lattice: keep even-coordinate pixels (all layers).

    Two retained pixels are connected at the coarse scale exactly when a
    straight two-step connection path joins them at the fine scale.  Each
    dropped pixel is assigned to the retained pixel reached by stepping
    toward its 2x2 block anchor (up before left on the diagonal).
    """
    cached = grid._cache.get("scale_map")
    if cached is not None:
        return cached
    xs, ys = grid.coords
    even = (xs % 2 == 0) & (ys % 2 == 0)
    retained = np.nonzero(even)[0].astype(np.int32)
    coarse_of_fine = np.full(grid.pixel_count, -1, dtype=np.int32)
    coarse_of_fine[retained] = np.arange(len(retained), dtype=np.int32)

    up, down, left, right = grid.nbr

    def two_step(first: np.ndarray, second: np.ndarray) -> np.ndarray:
        mid = first[retained]
        ok = mid >= 0
        dest = np.full(len(retained), -1, dtype=np.int64)
        dest[ok] = second[mid[ok]]
        reached = dest >= 0
        out = np.full(len(retained), -1, dtype=np.int32)
        out[reached] = coarse_of_fine[dest[reached]]
        return out

    coarse_nbr = np.stack([
        two_step(up, up),
        two_step(down, down),
        two_step(left, left),
        two_step(right, right),
    ])
    coarse_coords = np.stack([xs[retained] // 2, ys[retained] // 2])
    coarse_disp = None if grid.disp is None else grid.disp[retained]
    coarse = IndexGrid(coarse_coords, coarse_nbr,
                       (grid.width + 1) // 2, (grid.height + 1) // 2, coarse_disp)

    # Assignment of dropped pixels toward their block anchor.
    assignment = np.full(grid.pixel_count, -1, dtype=np.int32)
    assignment[retained] = coarse_of_fine[retained]
    ox = xs % 2
    oy = ys % 2
    sel = (ox == 1) & (oy == 0)
    assignment[sel] = np.where(left[sel] >= 0, coarse_of_fine[left[sel]], -1)
    sel = (ox == 0) & (oy == 1)
    assignment[sel] = np.where(up[sel] >= 0, coarse_of_fine[up[sel]], -1)
    sel = np.nonzero((ox == 1) & (oy == 1))[0]
    via_up = up[sel]
    step2 = np.where(via_up >= 0, left[np.maximum(via_up, 0)], -1)
    step2 = np.where(via_up >= 0, step2, -1)
    res = np.where(step2 >= 0, coarse_of_fine[np.maximum(step2, 0)], -1)
    need = res < 0
    via_left = left[sel[need]]
    step2b = np.where(via_left >= 0, up[np.maximum(via_left, 0)], -1)
    step2b = np.where(via_left >= 0, step2b, -1)
    res[need] = np.where(step2b >= 0, coarse_of_fine[np.maximum(step2b, 0)], -1)
    assignment[sel] = res

    smap = ScaleMap(grid, coarse, retained, assignment)
    grid._cache["scale_map"] = smap
    return smap


def ldi_upscale(coarse: LdiTensor, smap: ScaleMap) -> LdiTensor:
    """Nearest upscale: every fine pixel takes its coarse pixel's value.

    Fine pixels with no coarse assignment get 0; upscaling the mask tensor
    through the same path flags them unknown.
    """
    if coarse.grid is not smap.coarse:
        if coarse.values.shape[1] != smap.coarse.pixel_count:
            raise InputError("tensor does not match the scale map's coarse grid")
    a = smap.assignment
    vals = coarse.values[:, np.maximum(a, 0)].copy()
    vals[:, a < 0] = 0.0
    return LdiTensor(vals, smap.fine)


def ldi_partial_conv(x: LdiTensor, mask: LdiTensor, spec: KernelSpec,
                     smap: ScaleMap | None = None) -> tuple[LdiTensor, LdiTensor]:
    """Partial convolution over BFS-gathered kernel slots.

    Per output pixel: y = W.(x*m over filled slots) * (k^2 / sum m) + b when
    any slot is known, else 0; the new mask marks pixels with sum m > 0.
    Empty slots contribute zero to both sums.  With stride 2 the output
    lives on the coarse grid of ``smap`` and windows are centered on the
    retained fine pixels.
    """
    if x.channels != spec.in_channels:
        raise InputError(f"input has {x.channels} channels, "
                         f"kernel expects {spec.in_channels}")
    if mask.channels != 1:
        raise InputError("mask must be single-channel")
    grid = x.grid
    gat = gather_all(grid, spec.kernel)
    if spec.stride == 2:
        if smap is None:
            raise InputError("stride-2 conv needs a scale map")
        gat = gat[smap.retained]
        out_grid = smap.coarse
    else:
        out_grid = grid

    kk = spec.kernel * spec.kernel
    empty = gat < 0
    safe = np.maximum(gat, 0)

    m64 = mask.values[0].astype(np.float64)
    gm = m64[safe]
    gm[empty] = 0.0
    msum = gm.sum(axis=1)

    w = spec.weight.astype(np.float64).reshape(spec.out_channels, -1)
    gx = x.values.astype(np.float64)[:, safe]   # (C, Ko, kk)
    gx[:, empty] = 0.0
    masked = gx * gm[None, :, :]
    cols = masked.transpose(1, 0, 2).reshape(gat.shape[0], -1)  # (Ko, C*kk)
    y = cols @ w.T                                              # (Ko, out)

    known = msum > 0
    scale = np.zeros_like(msum)
    scale[known] = kk / msum[known]
    y *= scale[:, None]
    y[known] += spec.bias.astype(np.float64)[None, :]
    y[~known] = 0.0

    out = LdiTensor(y.T.astype(np.float32), out_grid)
    new_mask = LdiTensor(known.astype(np.float32)[None, :], out_grid)
    return out, new_mask


# ---------------------------------------------------------------------------
# Plain 2D reference implementations (the training-domain semantics).

def conv2d_partial(x: np.ndarray, mask: np.ndarray, spec: KernelSpec
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Reference partial convolution on image tensors.

    x: (C, H, W) float; mask: (H, W) float.  Borders use zero padding of
    values and mask (partial padding).  Stride 2 keeps even positions.
    """
    k, r = spec.kernel, spec.kernel // 2
    c, h, w = x.shape
    xp = np.zeros((c, h + 2 * r, w + 2 * r), dtype=np.float64)
    xp[:, r:r + h, r:r + w] = x * mask[None, :, :]
    mp = np.zeros((h + 2 * r, w + 2 * r), dtype=np.float64)
    mp[r:r + h, r:r + w] = mask

    xw = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(1, 2))
    mw = np.lib.stride_tricks.sliding_window_view(mp, (k, k))
    if spec.stride == 2:
        xw = xw[:, ::2, ::2]
        mw = mw[::2, ::2]

    msum = mw.sum(axis=(-1, -2))
    y = np.einsum("cijuv,ocuv->oij", xw, spec.weight.astype(np.float64),
                  optimize=True)
    known = msum > 0
    scale = np.zeros_like(msum)
    scale[known] = (k * k) / msum[known]
    y *= scale[None, :, :]
    y += np.where(known[None, :, :], spec.bias.astype(np.float64)[:, None, None], 0.0)
    y[:, ~known] = 0.0
    return y.astype(np.float32), known.astype(np.float32)


def upscale2d(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest 2x upscale: each 2x2 block takes its coarse pixel's value."""
    up = np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)
    return up[:, :out_h, :out_w]
