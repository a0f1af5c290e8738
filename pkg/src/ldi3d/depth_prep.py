"""Disparity cleanup: edge-aware weighted median, small-component merging.

Learned disparity maps wash discontinuities out over several pixels.  The
weighted median sharpens them into step edges; the component pass then
absorbs leftover small mid-depth fragments into whichever adjacent side
touches them the most.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InputError
from .ldi import DisparityImage


@dataclass(frozen=True)
class FilterParams:
    kernel_size: int = 5
    sigma: float = 0.2            # Gaussian width over disparity difference
    step_threshold: float = 0.05  # |Δd| above this marks a discontinuity
    min_component: int = 20       # components below this size get merged

    def __post_init__(self):
        if self.kernel_size % 2 != 1 or self.kernel_size < 1:
            raise InputError("kernel_size must be odd and positive")
        if self.sigma <= 0:
            raise InputError("sigma must be positive")
        if not (0.0 < self.step_threshold < 1.0):
            raise InputError("step_threshold must lie in (0, 1)")
        if self.min_component < 1:
            raise InputError("min_component must be >= 1")


def edge_pixel_mask(d: np.ndarray, step_threshold: float) -> np.ndarray:
    """Pixels having at least one 4-neighbor further than the threshold away."""
    edge = np.zeros(d.shape, dtype=bool)
    jump_h = np.abs(d[:, 1:] - d[:, :-1]) > step_threshold
    edge[:, 1:] |= jump_h
    edge[:, :-1] |= jump_h
    jump_v = np.abs(d[1:, :] - d[:-1, :]) > step_threshold
    edge[1:, :] |= jump_v
    edge[:-1, :] |= jump_v
    return edge


def weighted_median_filter(disp: DisparityImage, params: FilterParams = FilterParams()
                           ) -> DisparityImage:
    """Edge-aware weighted median: a selection filter, no new values.

    Samples are weighted by a Gaussian on their disparity difference to the
    window center.  Samples that sit next to a discontinuity have their
    weight disabled, which forces a clean foreground/background decision;
    if that empties a window, the plain median of the clipped window is
    used instead.  Borders are handled by window clipping.
    """
    from ._kernels import weighted_median_kernel

    d = disp.data.astype(np.float32)
    r = params.kernel_size // 2
    edge = edge_pixel_mask(d, params.step_threshold)
    inv_two_sigma_sq = 1.0 / (2.0 * float(params.sigma) ** 2)
    out = weighted_median_kernel(d, edge, r, inv_two_sigma_sq)
    return DisparityImage(out)


def label_components(d: np.ndarray, step_threshold: float) -> tuple[np.ndarray, int]:
    """4-connected components where adjacency means |Δd| <= threshold."""
    h, w = d.shape
    ids = np.arange(h * w, dtype=np.int64).reshape(h, w)
    keep_h = np.abs(d[:, 1:] - d[:, :-1]) <= step_threshold
    keep_v = np.abs(d[1:, :] - d[:-1, :]) <= step_threshold
    rows = np.concatenate([ids[:, :-1][keep_h], ids[:-1, :][keep_v]])
    cols = np.concatenate([ids[:, 1:][keep_h], ids[1:, :][keep_v]])
    graph = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)),
                       shape=(h * w, h * w))
    n, labels = connected_components(graph, directed=False)
    return labels.reshape(h, w), n


def merge_small_components(disp: DisparityImage,
                           params: FilterParams = FilterParams(),
                           max_passes: int = 16) -> DisparityImage:
    """Absorb components smaller than ``min_component`` into a neighbor side.

    The winning side is the one with the larger contact surface: boundary
    edges toward nearer pixels count as foreground contact, toward farther
    pixels as background contact.  Absorbed pixels copy the disparity of the
    Euclidean-nearest boundary pixel on the winning side, keeping the edge
    step-like.  Repeats until no small component remains.
    """
    d = disp.data.copy()
    h, w = d.shape
    tau = params.step_threshold

    for _ in range(max_passes):
        labels, n = label_components(d, tau)
        sizes = np.bincount(labels.ravel(), minlength=n)
        small = np.nonzero(sizes < params.min_component)[0]
        if len(small) == 0:
            break
        flat_labels = labels.ravel()
        order = np.argsort(flat_labels, kind="stable")
        starts = np.searchsorted(flat_labels[order], np.arange(n + 1))
        changed = False
        # Smallest components first so chains of fragments resolve inward.
        for comp in sorted(small, key=lambda c: (sizes[c], c)):
            members = order[starts[comp]:starts[comp + 1]]
            ys, xs = np.divmod(members, w)
            fg_pts, bg_pts = [], []
            fg_edges = bg_edges = 0
            for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                ny, nx = ys + dy, xs + dx
                ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
                if not ok.any():
                    continue
                outside = ok.copy()
                outside[ok] = labels[ny[ok], nx[ok]] != comp
                if not outside.any():
                    continue
                oy, ox = ny[outside], nx[outside]
                nearer = d[oy, ox] > d[ys[outside], xs[outside]]
                fg_edges += int(np.count_nonzero(nearer))
                bg_edges += int(np.count_nonzero(~nearer))
                fg_pts.append(np.stack([oy[nearer], ox[nearer]], axis=1))
                bg_pts.append(np.stack([oy[~nearer], ox[~nearer]], axis=1))
            if fg_edges + bg_edges == 0:
                continue  # component with no outside boundary (whole image)
            pts = np.concatenate(fg_pts) if fg_edges > bg_edges else np.concatenate(bg_pts)
            pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
            member_yx = np.stack([ys, xs], axis=1)
            dist2 = ((member_yx[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
            nearest = np.argmin(dist2, axis=1)  # first minimum: (y, x) order
            d[ys, xs] = d[pts[nearest, 0], pts[nearest, 1]]
            changed = True
        if not changed:
            break

    return DisparityImage(d)


def clean_disparity(disp: DisparityImage, params: FilterParams = FilterParams()
                    ) -> tuple[DisparityImage, DisparityImage]:
    """Full cleanup: weighted median then component merge.

    Returns (filtered, cleaned) so callers can time/debug both stages.
    """
    filtered = weighted_median_filter(disp, params)
    return filtered, merge_small_components(filtered, params)
