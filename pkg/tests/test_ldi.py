"""LDI core: lifting, structural validation, splat reprojection."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldi3d.errors import InputError
from ldi3d.ldi import (
    Camera,
    DisparityImage,
    Ldi,
    RigidPose,
    lift_to_ldi,
    reproject_splat,
    validate,
    IX, IY, ILEFT, IRIGHT, IUP, IDOWN,
)


def flat_image(h, w, value=0.5):
    return np.full((h, w, 3), value, dtype=np.float32)


def brute_force_cut_edges(d: np.ndarray, tau: float) -> set:
    """Oracle: enumerate all adjacent pairs with |Δd| > tau."""
    h, w = d.shape
    cuts = set()
    for y in range(h):
        for x in range(w):
            if x + 1 < w and abs(float(d[y, x]) - float(d[y, x + 1])) > tau:
                cuts.add(((x, y), (x + 1, y)))
            if y + 1 < h and abs(float(d[y, x]) - float(d[y + 1, x])) > tau:
                cuts.add(((x, y), (x, y + 1)))
    return cuts


def ldi_cut_edges(ldi: Ldi) -> set:
    """Cut edges of a single-layer LDI, as ((x,y),(x+1,y)) or ((x,y),(x,y+1))."""
    cuts = set()
    xs, ys = ldi.index[IX], ldi.index[IY]
    for p in range(ldi.pixel_count):
        x, y = int(xs[p]), int(ys[p])
        if x + 1 < ldi.width and ldi.index[IRIGHT, p] < 0:
            cuts.add(((x, y), (x + 1, y)))
        if y + 1 < ldi.height and ldi.index[IDOWN, p] < 0:
            cuts.add(((x, y), (x, y + 1)))
    return cuts


class TestLift:
    def test_constant_disparity_fully_connected(self):
        disp = DisparityImage(np.full((8, 8), 0.5, dtype=np.float32))
        ldi = lift_to_ldi(flat_image(8, 8), disp, 0.05)
        assert ldi.pixel_count == 64
        assert ldi.connection_count() == 2 * 8 * 7
        assert ldi_cut_edges(ldi) == set()
        assert ldi.mask.all()

    def test_half_step_cuts_middle_edges(self):
        d = np.full((8, 8), 0.1, dtype=np.float32)
        d[:, 4:] = 0.9
        ldi = lift_to_ldi(flat_image(8, 8), DisparityImage(d), 0.05)
        cuts = ldi_cut_edges(ldi)
        assert cuts == {((3, y), (4, y)) for y in range(8)}

    def test_random_matches_brute_force(self):
        rng = np.random.default_rng(7)
        d = rng.random((16, 16)).astype(np.float32)
        ldi = lift_to_ldi(flat_image(16, 16), DisparityImage(d), 0.05)
        assert ldi_cut_edges(ldi) == brute_force_cut_edges(d, 0.05)

    def test_connection_count_formula(self):
        rng = np.random.default_rng(3)
        d = (rng.random((12, 10)) > 0.5).astype(np.float32) * 0.8 + 0.1
        ldi = lift_to_ldi(flat_image(12, 10), DisparityImage(d), 0.05)
        adjacent_pairs = 12 * 9 + 11 * 10
        cut = len(brute_force_cut_edges(d, 0.05))
        assert ldi.connection_count() == adjacent_pairs - cut

    def test_dimension_mismatch_raises(self):
        disp = DisparityImage(np.full((8, 8), 0.5, dtype=np.float32))
        with pytest.raises(InputError):
            lift_to_ldi(flat_image(8, 9), disp, 0.05)

    def test_colors_and_disparity_stored(self):
        rng = np.random.default_rng(11)
        img = rng.random((8, 8, 3)).astype(np.float32)
        d = rng.random((8, 8)).astype(np.float32)
        ldi = lift_to_ldi(img, DisparityImage(d), 0.05)
        k = 3 * 8 + 5
        assert np.allclose(ldi.colors[:, k], img[3, 5])
        assert ldi.disparity[k] == d[3, 5]


class TestValidate:
    def test_lifted_ldi_is_clean(self):
        rng = np.random.default_rng(5)
        d = rng.random((10, 10)).astype(np.float32)
        ldi = lift_to_ldi(flat_image(10, 10), DisparityImage(d), 0.05)
        assert validate(ldi) == []

    def test_asymmetric_neighbor_reported(self):
        disp = DisparityImage(np.full((8, 8), 0.5, dtype=np.float32))
        ldi = lift_to_ldi(flat_image(8, 8), disp, 0.05).thaw()
        # Pixel 9 keeps pixel 10 as right-neighbor, but 10 forgets 9.
        ldi.index[ILEFT, 10] = -1
        report = validate(ldi)
        assert any("9" in r and "10" in r for r in report)

    def test_bad_geometry_reported(self):
        disp = DisparityImage(np.full((8, 8), 0.5, dtype=np.float32))
        ldi = lift_to_ldi(flat_image(8, 8), disp, 0.05).thaw()
        ldi.index[IRIGHT, 0] = 17  # (1, 2) is not (x+1, y) of (0, 0)
        report = validate(ldi)
        assert any("expected" in r for r in report)

    def test_out_of_lattice_reported(self):
        disp = DisparityImage(np.full((8, 8), 0.5, dtype=np.float32))
        ldi = lift_to_ldi(flat_image(8, 8), disp, 0.05).thaw()
        ldi.index[IX, 3] = 99
        assert any("outside lattice" in r for r in validate(ldi))

    def test_disparity_out_of_range_reported(self):
        disp = DisparityImage(np.full((8, 8), 0.5, dtype=np.float32))
        ldi = lift_to_ldi(flat_image(8, 8), disp, 0.05).thaw()
        ldi.values[3, 0] = 1.5
        assert any("disparity" in r for r in validate(ldi))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1), st.integers(8, 20), st.integers(8, 20))
    def test_property_lift_then_validate_clean(self, seed, h, w):
        rng = np.random.default_rng(seed)
        d = rng.random((h, w)).astype(np.float32)
        ldi = lift_to_ldi(flat_image(h, w), DisparityImage(d), 0.05)
        assert validate(ldi) == []


class TestReproject:
    def test_identity_pose_reproduces_lattice(self):
        rng = np.random.default_rng(2)
        img = rng.random((12, 16, 3)).astype(np.float32)
        d = rng.random((12, 16)).astype(np.float32) * 0.8 + 0.1
        ldi = lift_to_ldi(img, DisparityImage(d), 0.05)
        cam = Camera(16, 12)
        buf = reproject_splat(ldi, cam, RigidPose())
        assert (buf.layer_count() == 1).all()
        np.testing.assert_array_equal(buf.front_image(), img)
        # Each source pixel maps to its own cell.
        for y in range(12):
            for x in range(16):
                samples = buf.samples_at(x, y)
                assert len(samples) == 1
                assert samples[0][2] == y * 16 + x

    def test_dolly_in_constant_depth_keeps_lists_short(self):
        img = flat_image(12, 16, 0.3)
        d = np.full((12, 16), 0.5, dtype=np.float32)
        ldi = lift_to_ldi(img, DisparityImage(d), 0.05)
        cam = Camera(16, 12)
        # Moving the camera toward the scene shrinks camera-frame z.
        pose = RigidPose(np.eye(3), np.array([0.0, 0.0, -0.37]))
        buf = reproject_splat(ldi, cam, pose)
        assert buf.layer_count().max() <= 1

    def test_lateral_offset_matches_brute_force(self):
        # Two-surface scene; oracle projects every pixel independently.
        img = flat_image(10, 12, 0.6)
        d = np.full((10, 12), 0.2, dtype=np.float32)
        d[3:7, 4:9] = 0.8
        ldi = lift_to_ldi(img, DisparityImage(d), 0.05)
        cam = Camera(12, 10)
        pose = RigidPose(np.eye(3), np.array([0.21, -0.13, 0.0]))
        buf = reproject_splat(ldi, cam, pose)

        import math
        counts = np.zeros((10, 12), dtype=int)
        f = cam.focal_px
        for p in range(ldi.pixel_count):
            x = float(ldi.index[IX, p])
            y = float(ldi.index[IY, p])
            z = 1.0 / max(float(ldi.disparity[p]), cam.near_disp)
            px = (x - cam.cx) / f * z + 0.21
            py = (y - cam.cy) / f * z - 0.13
            u = f * px / z + cam.cx
            v = f * py / z + cam.cy
            ui = math.floor(u + 0.5)
            vi = math.floor(v + 0.5)
            if 0 <= ui < 12 and 0 <= vi < 10:
                counts[vi, ui] += 1
        np.testing.assert_array_equal(buf.layer_count(), counts)

    def test_lists_are_depth_ordered(self):
        rng = np.random.default_rng(9)
        img = rng.random((10, 10, 3)).astype(np.float32)
        d = rng.random((10, 10)).astype(np.float32)
        ldi = lift_to_ldi(img, DisparityImage(d), 0.05)
        cam = Camera(10, 10)
        pose = RigidPose(np.eye(3), np.array([0.3, 0.1, 0.05]))
        buf = reproject_splat(ldi, cam, pose)
        for y in range(10):
            for x in range(10):
                ds = [s[1] for s in buf.samples_at(x, y)]
                assert ds == sorted(ds, reverse=True)

    def test_camera_bounds(self):
        with pytest.raises(InputError):
            Camera(8, 8, fov_deg=5.0)
        with pytest.raises(InputError):
            Camera(8, 8, near_disp=0.0)
