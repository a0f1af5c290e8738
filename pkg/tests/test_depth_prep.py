"""Depth cleanup: weighted median filter and small-component merging."""
from __future__ import annotations

import math

import numpy as np
import pytest

from ldi3d.depth_prep import (
    FilterParams,
    edge_pixel_mask,
    label_components,
    merge_small_components,
    weighted_median_filter,
)
from ldi3d.errors import InputError
from ldi3d.ldi import DisparityImage


def oracle_weighted_median(d: np.ndarray, y: int, x: int, p: FilterParams) -> float:
    """Sort-based oracle: explicit window walk, Gaussian weights, balance scan.

    Mirrors the stated selection rule with plain Python loops: weights are
    a Gaussian on the disparity difference to the center, disabled for
    samples next to a discontinuity; the winner is the sample whose sums of
    preceding and following weights are closest to equal.
    """
    h, w = d.shape
    r = p.kernel_size // 2
    edge = edge_pixel_mask(d, p.step_threshold)
    center = float(d[y, x])
    entries = []
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            yy, xx = y + dy, x + dx
            if 0 <= yy < h and 0 <= xx < w:
                v = float(d[yy, xx])
                wgt = math.exp(-((v - center) ** 2) / (2 * p.sigma ** 2))
                if edge[yy, xx]:
                    wgt = 0.0
                entries.append((v, wgt))
    if sum(e[1] for e in entries) == 0.0:
        entries = [(v, 1.0) for v, _ in entries]
    entries.sort(key=lambda e: e[0])
    total = sum(e[1] for e in entries)
    best_val, best_imbalance = None, None
    pre = 0.0
    for v, wgt in entries:
        post = total - pre - wgt
        if wgt > 0.0:
            imbalance = abs(pre - post)
            if best_imbalance is None or imbalance < best_imbalance:
                best_imbalance = imbalance
                best_val = v
        pre += wgt
    return best_val


class TestWeightedMedian:
    def test_constant_image_unchanged(self):
        d = DisparityImage(np.full((10, 12), 0.42, dtype=np.float32))
        out = weighted_median_filter(d)
        np.testing.assert_array_equal(out.data, d.data)

    def test_step_edge_preserved(self):
        arr = np.full((12, 12), 0.1, dtype=np.float32)
        arr[:, 6:] = 0.9
        out = weighted_median_filter(DisparityImage(arr))
        np.testing.assert_array_equal(out.data, arr)

    def test_matches_oracle_on_random_windows(self):
        rng = np.random.default_rng(21)
        p = FilterParams()
        for trial in range(12):
            d = rng.random((9, 9)).astype(np.float32)
            out = weighted_median_filter(DisparityImage(d), p)
            for y in range(9):
                for x in range(9):
                    expect = oracle_weighted_median(d, y, x, p)
                    assert out.data[y, x] == np.float32(expect), (trial, y, x)

    def test_matches_oracle_on_structured_image(self):
        # Piecewise regions + noise: exercises the disabled-weight path.
        rng = np.random.default_rng(5)
        d = rng.random((16, 16)).astype(np.float32) * 0.05 + 0.1
        d[4:12, 6:14] += 0.6
        out = weighted_median_filter(DisparityImage(d))
        p = FilterParams()
        for y in range(16):
            for x in range(16):
                assert out.data[y, x] == np.float32(oracle_weighted_median(d, y, x, p))

    def test_output_values_from_window(self):
        rng = np.random.default_rng(3)
        d = rng.random((10, 10)).astype(np.float32)
        out = weighted_median_filter(DisparityImage(d))
        r = 2
        for y in range(10):
            for x in range(10):
                window = d[max(0, y - r):y + r + 1, max(0, x - r):x + r + 1]
                assert out.data[y, x] in window

    def test_idempotent_on_piecewise_constant(self):
        arr = np.full((16, 16), 0.2, dtype=np.float32)
        arr[2:9, 3:10] = 0.7
        arr[10:, 12:] = 0.5
        once = weighted_median_filter(DisparityImage(arr))
        twice = weighted_median_filter(once)
        np.testing.assert_array_equal(once.data, twice.data)

    def test_param_validation(self):
        with pytest.raises(InputError):
            FilterParams(kernel_size=4)
        with pytest.raises(InputError):
            FilterParams(sigma=0.0)
        with pytest.raises(InputError):
            FilterParams(step_threshold=1.5)
        with pytest.raises(InputError):
            FilterParams(min_component=0)


def count_small_components(d: np.ndarray, tau: float, min_px: int) -> int:
    labels, n = label_components(d, tau)
    sizes = np.bincount(labels.ravel(), minlength=n)
    return int(np.count_nonzero(sizes < min_px))


class TestMergeComponents:
    def test_19_pixel_blob_absorbed(self):
        arr = np.full((16, 16), 0.9, dtype=np.float32)
        # 19 pixels at middle depth: 4x5 minus one corner.
        arr[4:8, 4:9] = 0.5
        arr[4, 4] = 0.9
        assert int((arr == 0.5).sum()) == 19
        out = merge_small_components(DisparityImage(arr))
        np.testing.assert_array_equal(out.data, np.full((16, 16), 0.9, np.float32))

    def test_20_pixel_blob_retained(self):
        arr = np.full((16, 16), 0.9, dtype=np.float32)
        arr[4:8, 4:9] = 0.5  # exactly 20 pixels
        out = merge_small_components(DisparityImage(arr))
        np.testing.assert_array_equal(out.data, arr)

    def test_contact_surface_12_fg_7_bg_merges_into_foreground(self):
        # 9-pixel strip flush with the top border: 19 boundary edges total.
        # Right side (9 edges) plus upper-left rows (3 edges) are nearer
        # (foreground, 12 edges); lower-left rows (6) plus the bottom cap (1)
        # are farther (background, 7 edges).
        h, w = 20, 20
        arr = np.full((h, w), 0.1, dtype=np.float32)
        arr[0:3, 0:8] = 0.9          # upper-left foreground block
        arr[:, 9:] = 0.9             # right foreground half
        arr[0:9, 8] = 0.5            # the blob: 9 px, rows 0..8 at col 8
        blob = arr == 0.5
        assert int(blob.sum()) == 9

        fg = bg = 0
        for y in range(h):
            for x in range(w):
                if not blob[y, x]:
                    continue
                for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w and not blob[yy, xx]:
                        if arr[yy, xx] > arr[y, x]:
                            fg += 1
                        else:
                            bg += 1
        assert (fg, bg) == (12, 7)

        out = merge_small_components(DisparityImage(arr))
        assert (out.data[blob] == 0.9).all()

    def test_absorbed_pixels_copy_nearest_boundary_value(self):
        # Winning side carries a gradient; each blob pixel must take the value
        # of its Euclidean-nearest winning-side boundary pixel.
        arr = np.full((16, 16), 0.05, dtype=np.float32)
        col = np.linspace(0.8, 0.99, 16, dtype=np.float32)
        arr[:, 8:] = col[:, None][:, :1]  # column gradient on the right half
        for y in range(16):
            arr[y, 8:] = col[y]
        # Blob hugging the gradient side: 3 rows x 3 cols = 9 px at col 5..7.
        arr[6:9, 5:8] = 0.5
        out = merge_small_components(DisparityImage(arr))
        # fg contact: 3 edges to col 8 (values col[6..8]); bg: 3+3+3 = 9 edges
        # -> background wins; nearest bg boundary pixel has value 0.05.
        assert (out.data[6:9, 5:8] == 0.05).all()

        # Flip: surround the blob with mostly-foreground contact.
        arr2 = np.full((16, 16), 0.05, dtype=np.float32)
        for y in range(16):
            arr2[y, 8:] = col[y]
        arr2[6:9, 8:11] = 0.5  # inside the gradient region
        out2 = merge_small_components(DisparityImage(arr2))
        for y in range(6, 9):
            for x in range(8, 11):
                # nearest fg boundary pixel is directly above (row 5), below
                # (row 9), or to the right (same row's gradient value)
                assert out2.data[y, x] in (col[5], col[6], col[7], col[8], col[9])
        assert count_small_components(out2.data, 0.05, 20) == 0

    def test_no_small_components_after_merge_random(self):
        rng = np.random.default_rng(17)
        for seed in range(5):
            base = rng.choice([0.1, 0.5, 0.9], size=(24, 24)).astype(np.float32)
            out = merge_small_components(DisparityImage(base))
            assert count_small_components(out.data, 0.05, 20) == 0

    def test_whole_image_single_component_untouched(self):
        arr = np.full((8, 8), 0.3, dtype=np.float32)
        out = merge_small_components(DisparityImage(arr))
        np.testing.assert_array_equal(out.data, arr)
