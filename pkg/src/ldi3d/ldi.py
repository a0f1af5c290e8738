"""Layered depth image core: lifting, validation, splat reprojection.

An LDI is a regular image lattice where every position holds zero or more
pixels.  Pixels carry color channels plus one disparity channel, and an
explicit 4-connectivity: each pixel has at most one neighbor per cardinal
direction, stored as indices into the pixel table.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

# Index-table rows.
IX, IY, ILEFT, IRIGHT, IUP, IDOWN = 0, 1, 2, 3, 4, 5
NO_NEIGHBOR = -1

# Direction order used everywhere a fixed traversal order matters.
DIRECTIONS = ("up", "down", "left", "right")
DIR_ROW = {"left": ILEFT, "right": IRIGHT, "up": IUP, "down": IDOWN}
DIR_OFFSET = {"left": (-1, 0), "right": (1, 0), "up": (0, -1), "down": (0, 1)}
OPPOSITE = {"left": "right", "right": "left", "up": "down", "down": "up"}


@dataclass(frozen=True)
class DisparityImage:
    """Dense per-pixel disparity, normalized to [0, 1] with 1 = nearest."""

    data: np.ndarray  # float32, shape (H, W)

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float32)
        if d.ndim != 2:
            raise InputError(f"disparity must be 2-D, got shape {d.shape}")
        h, w = d.shape
        if w < 8 or h < 8:
            raise InputError(f"disparity too small: {w}x{h}, need at least 8x8")
        if not np.all(np.isfinite(d)):
            raise InputError("disparity contains non-finite values")
        if d.min() < 0.0 or d.max() > 1.0:
            raise InputError("disparity values must lie in [0, 1]")
        d = d.copy()
        d.flags.writeable = False
        object.__setattr__(self, "data", d)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class Camera:
    """Pinhole camera for lifting pixels to 3D and projecting them back.

    The principal point sits at the image center; pixels are square.
    ``near_disp`` clamps disparity away from zero so that far content
    (sky at d=0) maps to a finite depth 1/near_disp.
    """

    width: int
    height: int
    fov_deg: float = 60.0
    near_disp: float = 0.01

    def __post_init__(self):
        if not (10.0 < self.fov_deg < 120.0):
            raise InputError(f"vertical fov {self.fov_deg} outside (10, 120)")
        if self.near_disp <= 0.0:
            raise InputError("near_disp must be positive")

    @property
    def focal_px(self) -> float:
        return (self.height / 2.0) / np.tan(np.radians(self.fov_deg) / 2.0)

    @property
    def cx(self) -> float:
        return (self.width - 1) / 2.0

    @property
    def cy(self) -> float:
        return (self.height - 1) / 2.0

    def depth_from_disparity(self, d: np.ndarray) -> np.ndarray:
        return 1.0 / np.maximum(d, self.near_disp)

    def unproject(self, x: np.ndarray, y: np.ndarray, d: np.ndarray) -> np.ndarray:
        """Pixel coordinates + disparity -> 3D points (N, 3), camera frame.

        Camera looks down +z, x right, y down (image convention).
        """
        z = self.depth_from_disparity(np.asarray(d, dtype=np.float64))
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        f = self.focal_px
        return np.stack([(x - self.cx) / f * z, (y - self.cy) / f * z, z], axis=-1)

    def project(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """3D points -> (u, v, z).  Points behind the camera get z <= 0."""
        pts = np.asarray(pts, dtype=np.float64)
        z = pts[..., 2]
        f = self.focal_px
        with np.errstate(divide="ignore", invalid="ignore"):
            u = f * pts[..., 0] / z + self.cx
            v = f * pts[..., 1] / z + self.cy
        return u, v, z


@dataclass(frozen=True)
class RigidPose:
    """Relative camera pose: x_cam = R @ x + t."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return pts @ self.rotation.T + self.translation

    def inverse(self) -> "RigidPose":
        rt = self.rotation.T
        return RigidPose(rt, -rt @ self.translation)

    @property
    def is_identity(self) -> bool:
        return np.allclose(self.rotation, np.eye(3)) and np.allclose(self.translation, 0.0)


class Ldi:
    """Layered depth image.

    Attributes:
        values: (C, K) float32; last channel is disparity, the rest color.
        index: (6, K) int32 rows (x, y, left, right, up, down); -1 = none.
        mask: (K,) bool; True where the color is known.
        width, height: lattice extent.
    """

    def __init__(self, values: np.ndarray, index: np.ndarray, mask: np.ndarray,
                 width: int, height: int, *, copy: bool = True, freeze: bool = True):
        values = np.array(values, dtype=np.float32, copy=copy)
        index = np.array(index, dtype=np.int32, copy=copy)
        mask = np.array(mask, dtype=bool, copy=copy).reshape(-1)
        if values.ndim != 2 or index.ndim != 2 or index.shape[0] != 6:
            raise InputError("values must be (C, K) and index must be (6, K)")
        if values.shape[1] != index.shape[1] or mask.shape[0] != index.shape[1]:
            raise InputError("values/index/mask pixel counts disagree")
        self.values = values
        self.index = index
        self.mask = mask
        self.width = int(width)
        self.height = int(height)
        if freeze:
            for a in (self.values, self.index, self.mask):
                a.flags.writeable = False

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def pixel_count(self) -> int:
        return self.values.shape[1]

    @property
    def colors(self) -> np.ndarray:
        return self.values[:-1]

    @property
    def disparity(self) -> np.ndarray:
        return self.values[-1]

    def connection_count(self) -> int:
        """Number of undirected connections."""
        return int(np.count_nonzero(self.index[2:] >= 0)) // 2

    def position_key(self) -> np.ndarray:
        """Flattened lattice position per pixel (y * width + x)."""
        return self.index[IY].astype(np.int64) * self.width + self.index[IX]

    def thaw(self) -> "Ldi":
        """Writable deep copy (construction helper for pipeline stages)."""
        return Ldi(self.values, self.index, self.mask, self.width, self.height,
                   copy=True, freeze=False)


def per_cell_extreme(pos: np.ndarray, values: np.ndarray, n_cells: int,
                     mode: str, fill: float) -> np.ndarray:
    """Per-cell min or max of values grouped by position (sort + reduceat).

    Far faster than ufunc.at for millions of entries.
    """
    out = np.full(n_cells, fill, dtype=np.float64)
    if len(pos) == 0:
        return out
    order = np.argsort(pos, kind="stable")
    spos = pos[order]
    sval = values[order].astype(np.float64)
    heads = np.ones(len(spos), dtype=bool)
    heads[1:] = spos[1:] != spos[:-1]
    idx = np.nonzero(heads)[0]
    red = np.minimum.reduceat(sval, idx) if mode == "min" \
        else np.maximum.reduceat(sval, idx)
    out[spos[heads]] = red
    return out


def position_chains(ldi: Ldi) -> tuple[np.ndarray, np.ndarray, int]:
    """Per-cell singly linked pixel lists: (head, next, max depth).

    ``head[cell]`` holds the largest pixel id at that lattice position (or
    -1); ``next[p]`` chains downward through ids.  Lets positional queries
    run as repeated array gathers.
    """
    k = ldi.pixel_count
    pos = ldi.position_key()
    head = np.full(ldi.width * ldi.height, -1, dtype=np.int64)
    nxt = np.full(k, -1, dtype=np.int64)
    if k:
        order = np.lexsort((np.arange(k), pos))
        spos = pos[order]
        last = np.ones(k, dtype=bool)
        last[:-1] = spos[:-1] != spos[1:]
        head[spos[last]] = order[last]
        same_prev = np.zeros(k, dtype=bool)
        same_prev[1:] = spos[1:] == spos[:-1]
        nxt[order[same_prev]] = order[np.nonzero(same_prev)[0] - 1]
        counts = np.bincount(pos, minlength=1)
        depth = int(counts.max())
    else:
        depth = 0
    return head, nxt, depth


def lift_to_ldi(image: np.ndarray, disp: DisparityImage, step_threshold: float = 0.05) -> Ldi:
    """Lift a color image plus disparity to a single-layer LDI.

    Every pixel starts fully connected to its lattice neighbors except
    across discontinuities where the disparity difference exceeds
    ``step_threshold``.  All colors are known.

    Args:
        image: (H, W, 3) float array in [0, 1].
        disp: matching disparity image.
        step_threshold: disparity gap that cuts a connection.

    Raises:
        InputError: if dimensions disagree or the threshold is out of range.
    """
    image = np.asarray(image, dtype=np.float32)
    if image.ndim != 3 or image.shape[2] != 3:
        raise InputError(f"image must be (H, W, 3), got {image.shape}")
    h, w = disp.height, disp.width
    if image.shape[:2] != (h, w):
        raise InputError(
            f"image {image.shape[1]}x{image.shape[0]} does not match "
            f"disparity {w}x{h}")
    if not (0.0 < step_threshold < 1.0):
        raise InputError("step_threshold must lie in (0, 1)")

    k = w * h
    d = disp.data
    values = np.empty((4, k), dtype=np.float32)
    values[0] = image[..., 0].reshape(-1)
    values[1] = image[..., 1].reshape(-1)
    values[2] = image[..., 2].reshape(-1)
    values[3] = d.reshape(-1)

    ys, xs = np.divmod(np.arange(k, dtype=np.int32), np.int32(w))
    index = np.full((6, k), NO_NEIGHBOR, dtype=np.int32)
    index[IX] = xs
    index[IY] = ys

    ids = np.arange(k, dtype=np.int32).reshape(h, w)

    # Horizontal connections where |Δd| <= threshold.
    keep_h = np.abs(d[:, 1:] - d[:, :-1]) <= step_threshold
    src = ids[:, :-1][keep_h].ravel()
    index[IRIGHT, src] = src + 1
    index[ILEFT, src + 1] = src

    # Vertical connections.
    keep_v = np.abs(d[1:, :] - d[:-1, :]) <= step_threshold
    src = ids[:-1, :][keep_v].ravel()
    index[IDOWN, src] = src + w
    index[IUP, src + w] = src

    mask = np.ones(k, dtype=bool)
    return Ldi(values, index, mask, w, h, copy=False)


def validate(ldi: Ldi) -> list[str]:
    """Check structural invariants; return one message per violation.

    An empty list means the LDI is well formed.  Messages name the pixel
    indices involved so failures can be traced back to data.
    """
    report: list[str] = []
    idx = ldi.index
    k = ldi.pixel_count
    xs, ys = idx[IX], idx[IY]

    bad = np.nonzero((xs < 0) | (xs >= ldi.width) | (ys < 0) | (ys >= ldi.height))[0]
    for p in bad[:64]:
        report.append(f"pixel {p} at ({xs[p]}, {ys[p]}) outside lattice "
                      f"[0,{ldi.width})x[0,{ldi.height})")

    d = ldi.disparity
    bad = np.nonzero(~np.isfinite(d) | (d < 0.0) | (d > 1.0))[0]
    for p in bad[:64]:
        report.append(f"pixel {p} disparity {d[p]} outside [0, 1]")

    for name in DIRECTIONS:
        row = DIR_ROW[name]
        nbr = idx[row]
        has = nbr >= 0
        out_of_range = has & ((nbr < -1) | (nbr >= k))
        for p in np.nonzero(out_of_range)[0][:64]:
            report.append(f"pixel {p} {name}-neighbor index {nbr[p]} out of range")
        ok = has & ~out_of_range
        src = np.nonzero(ok)[0]
        tgt = nbr[src]
        dx, dy = DIR_OFFSET[name]
        geom_bad = (xs[tgt] != xs[src] + dx) | (ys[tgt] != ys[src] + dy)
        for i in np.nonzero(geom_bad)[0][:64]:
            p, q = src[i], tgt[i]
            report.append(
                f"pixel {p} {name}-neighbor {q} is at ({xs[q]}, {ys[q]}), "
                f"expected ({xs[p] + dx}, {ys[p] + dy})")
        back = idx[DIR_ROW[OPPOSITE[name]], tgt]
        asym = back != src
        for i in np.nonzero(asym)[0][:64]:
            p, q = src[i], tgt[i]
            report.append(
                f"asymmetric link: pixel {p} lists {q} as {name}-neighbor but "
                f"{q} lists {back[i]} as {OPPOSITE[name]}-neighbor")
    return report


@dataclass
class LayeredViewBuffer:
    """Per-target-pixel depth-ordered sample lists from reprojection.

    ``starts`` delimits, per lattice position (row-major), a slice into the
    flat sample arrays.  Samples within a slice are ordered front (largest
    disparity) to back.
    """

    width: int
    height: int
    starts: np.ndarray        # (W*H + 1,) int64 prefix offsets
    colors: np.ndarray        # (N, 3) float32
    disparities: np.ndarray   # (N,) float32
    sources: np.ndarray       # (N,) int64 source LDI pixel index

    def samples_at(self, x: int, y: int) -> list[tuple[np.ndarray, float, int]]:
        a, b = self.starts[y * self.width + x], self.starts[y * self.width + x + 1]
        return [(self.colors[i], float(self.disparities[i]), int(self.sources[i]))
                for i in range(a, b)]

    def layer_count(self) -> np.ndarray:
        return np.diff(self.starts).reshape(self.height, self.width)

    def front_image(self, background: float = 0.5) -> np.ndarray:
        """Color image of the nearest sample per pixel."""
        img = np.full((self.height * self.width, 3), background, dtype=np.float32)
        counts = np.diff(self.starts)
        has = counts > 0
        img[has] = self.colors[self.starts[:-1][has]]
        return img.reshape(self.height, self.width, 3)


def reproject_splat(ldi: Ldi, camera: Camera, pose: RigidPose) -> LayeredViewBuffer:
    """Forward-splat all LDI pixels into a novel view.

    Each pixel is lifted to 3D, transformed by ``pose``, projected, and
    splatted to the nearest target pixel.  Per target pixel the samples are
    ordered by decreasing disparity in the new view (near to far).  With an
    identity pose every pixel lands exactly on its own lattice position.
    """
    xs = ldi.index[IX].astype(np.float64)
    ys = ldi.index[IY].astype(np.float64)
    pts = camera.unproject(xs, ys, ldi.disparity)
    pts = pose.apply(pts)
    u, v, z = camera.project(pts)

    # Round half up: keeps uniformly magnified lattices collision-free.
    ui = np.floor(u + 0.5)
    vi = np.floor(v + 0.5)
    keep = (z > 0) & (ui >= 0) & (ui < camera.width) & (vi >= 0) & (vi < camera.height)
    src = np.nonzero(keep)[0]
    ui = ui[src].astype(np.int64)
    vi = vi[src].astype(np.int64)
    new_disp = (1.0 / np.maximum(z[src], 1e-9)).astype(np.float32)
    new_disp = np.minimum(new_disp, 1.0)

    cell = vi * camera.width + ui
    # Sort by (target cell, -disparity, source index); stable tie-break.
    order = np.lexsort((src, -new_disp.astype(np.float64), cell))
    cell = cell[order]
    src = src[order]
    new_disp = new_disp[order]

    n_cells = camera.width * camera.height
    counts = np.bincount(cell, minlength=n_cells)
    starts = np.zeros(n_cells + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])

    colors = ldi.colors[:, src].T.astype(np.float32).copy()
    return LayeredViewBuffer(camera.width, camera.height, starts, colors,
                             new_disp, src.astype(np.int64))
