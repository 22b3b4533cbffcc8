import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from clickcrop.raster import (
    BBox,
    bbox_of,
    component_containing,
    connected_components,
    dilate,
    distance_transform,
    erode,
    iou,
    largest_component,
    resize,
    stamp_disk,
    xor_diff,
)
from conftest import edt_brute, flood_fill_labels

masks_8x8 = arrays(bool, (8, 8), elements=st.booleans())


class TestIou:
    def test_identical_nonempty(self):
        m = np.zeros((4, 4), bool)
        m[1:3, 1:3] = True
        assert iou(m, m) == 1.0

    def test_disjoint(self):
        a = np.zeros((4, 4), bool)
        b = np.zeros((4, 4), bool)
        a[0, 0] = True
        b[3, 3] = True
        assert iou(a, b) == 0.0

    def test_shifted_block(self):
        # 2x2 block vs same block shifted one column: intersection 2, union 6
        a = np.zeros((4, 4), bool)
        b = np.zeros((4, 4), bool)
        a[1:3, 0:2] = True
        b[1:3, 1:3] = True
        assert iou(a, b) == pytest.approx(2 / 6)

    def test_both_empty_is_one(self):
        assert iou(np.zeros((3, 3), bool), np.zeros((3, 3), bool)) == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            iou(np.zeros((3, 3), bool), np.zeros((4, 4), bool))

    @given(masks_8x8, masks_8x8)
    def test_symmetric(self, a, b):
        assert iou(a, b) == iou(b, a)

    @given(masks_8x8)
    def test_self_is_one(self, a):
        assert iou(a, a) == 1.0

    @given(masks_8x8, masks_8x8)
    def test_adding_shared_pixels_does_not_decrease(self, a, b):
        base = iou(a, b)
        grown = iou(a | b, b | a | b)
        assert grown >= base or np.isclose(grown, base)


class TestXorDiff:
    def test_equal_masks(self):
        m = np.random.default_rng(0).random((5, 5)) < 0.5
        assert not xor_diff(m, m).any()

    def test_full_vs_empty(self):
        full = np.ones((3, 3), bool)
        empty = np.zeros((3, 3), bool)
        assert xor_diff(full, empty).all()

    def test_half_overlap(self):
        left = np.zeros((4, 4), bool)
        top = np.zeros((4, 4), bool)
        left[:, :2] = True
        top[:2, :] = True
        d = xor_diff(left, top)
        assert int(d.sum()) == 8
        assert not d[:2, :2].any()


class TestConnectedComponents:
    def test_empty(self):
        labels, n = connected_components(np.zeros((4, 4), bool))
        assert n == 0 and not labels.any()

    def test_two_islands_scan_order(self):
        m = np.zeros((4, 4), bool)
        m[0, 0] = m[3, 3] = True
        labels, n = connected_components(m, 8)
        assert n == 2
        assert labels[0, 0] == 1 and labels[3, 3] == 2

    def test_diagonal_connectivity(self):
        m = np.zeros((4, 4), bool)
        m[0, 0] = m[1, 1] = True
        assert connected_components(m, 4)[1] == 2
        assert connected_components(m, 8)[1] == 1

    @pytest.mark.parametrize("connectivity", [4, 8])
    def test_matches_flood_fill_randoms(self, connectivity):
        rng = np.random.default_rng(7)
        for _ in range(100):
            m = rng.random((16, 16)) < rng.uniform(0.2, 0.8)
            labels, n = connected_components(m, connectivity)
            ref, ref_n = flood_fill_labels(m, connectivity)
            assert n == ref_n
            assert np.array_equal(labels, ref)


class TestComponentQueries:
    def setup_method(self):
        m = np.zeros((4, 4), bool)
        m[0, 0] = True
        m[2:4, 2:4] = True
        self.labels, self.n = connected_components(m, 8)

    def test_containing_hit(self):
        assert component_containing(self.labels, 0, 0) == 1
        assert component_containing(self.labels, 3, 3) == 2

    def test_containing_background(self):
        assert component_containing(self.labels, 1, 3) is None

    def test_largest(self):
        assert largest_component(self.labels) == 2

    def test_largest_empty(self):
        assert largest_component(np.zeros((3, 3), np.int32)) is None

    def test_largest_tie_breaks_to_smaller_id(self):
        m = np.zeros((4, 4), bool)
        m[0, 0:2] = True
        m[3, 0:2] = True
        labels, _ = connected_components(m, 8)
        assert largest_component(labels) == 1


class TestMorphology:
    def test_dilate_empty(self):
        assert not dilate(np.zeros((5, 5), bool), 2).any()

    def test_erode_block_to_center(self):
        m = np.zeros((5, 5), bool)
        m[1:4, 1:4] = True
        out = erode(m, 1)
        expected = np.zeros((5, 5), bool)
        expected[2, 2] = True
        assert np.array_equal(out, expected)

    def test_dilate_center_to_plus(self):
        m = np.zeros((5, 5), bool)
        m[2, 2] = True
        out = dilate(m, 1)
        assert int(out.sum()) == 5
        assert out[2, 2] and out[1, 2] and out[3, 2] and out[2, 1] and out[2, 3]

    @given(masks_8x8, st.integers(1, 2))
    @settings(max_examples=50)
    def test_opening_contained_closing_contains(self, m, r):
        # pixels beyond the border count as false, so closing containment
        # holds away from the frame edge (erosion eats border-adjacent pixels)
        opening = dilate(erode(m, r), r)
        closing = erode(dilate(m, r), r)
        assert not (opening & ~m).any()
        interior = np.zeros_like(m)
        interior[r:-r, r:-r] = True
        assert not (m & interior & ~closing).any()


class TestDistanceTransform:
    def test_all_false(self):
        assert not distance_transform(np.zeros((4, 4), bool)).any()

    def test_single_pixel(self):
        m = np.zeros((5, 5), bool)
        m[2, 2] = True
        d = distance_transform(m)
        assert d[2, 2] == 1.0
        assert d.sum() == 1.0

    def test_full_true_5x5_center(self):
        # border counts as false, so the center of an all-true 5x5 sits 3 away
        d = distance_transform(np.ones((5, 5), bool))
        assert d[2, 2] == pytest.approx(3.0)
        assert d.max() == pytest.approx(3.0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            m = rng.random((16, 16)) < rng.uniform(0.3, 0.9)
            assert np.allclose(distance_transform(m), edt_brute(m), atol=1e-6)


class TestStampDisk:
    def test_center_disk_13(self):
        out = stamp_disk(np.zeros((7, 7), np.float32), 3, 3, radius=2)
        assert int(out.sum()) == 13

    def test_corner_clipped_6(self):
        out = stamp_disk(np.zeros((7, 7), np.float32), 0, 0, radius=2)
        assert int(out.sum()) == 6

    def test_radius_zero_single(self):
        out = stamp_disk(np.zeros((7, 7), np.float32), 3, 3, radius=0)
        assert int(out.sum()) == 1 and out[3, 3] == 1.0

    def test_does_not_mutate_input(self):
        src = np.zeros((5, 5), np.float32)
        stamp_disk(src, 2, 2)
        assert not src.any()


class TestResize:
    def test_same_size_identity(self):
        m = np.random.default_rng(3).random((6, 7)).astype(np.float32)
        assert np.array_equal(resize(m, (7, 6)), m)

    def test_checkerboard_upscale(self):
        cb = np.array([[1, 0], [0, 1]], bool)
        out = resize(cb, (4, 4))
        expected = np.array(
            [[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, 1]], bool
        )
        assert np.array_equal(out, expected)

    def test_constant_any_size(self):
        c = np.full((5, 5), 3.25)
        assert np.allclose(resize(c, (9, 4)), 3.25)
        assert np.allclose(resize(c, (2, 12)), 3.25)

    @given(st.integers(2, 6), st.integers(2, 6))
    @settings(max_examples=30)
    def test_nearest_block_roundtrip(self, h, w):
        rng = np.random.default_rng(h * 31 + w)
        m = rng.random((h, w)) < 0.5
        up = resize(m, (2 * w, 2 * h))
        back = resize(up, (w, h))
        assert np.array_equal(back, m)

    def test_bilinear_matches_pointwise_oracle(self):
        rng = np.random.default_rng(4)
        src = rng.random((5, 7))
        out = resize(src, (11, 6), mode="bilinear")
        sh, sw = src.shape
        for oy in range(6):
            for ox in range(11):
                x = (ox + 0.5) * (sw / 11) - 0.5
                y = (oy + 0.5) * (sh / 6) - 0.5
                x0, y0 = int(np.floor(x)), int(np.floor(y))
                tx, ty = x - x0, y - y0
                xa, xb = np.clip([x0, x0 + 1], 0, sw - 1)
                ya, yb = np.clip([y0, y0 + 1], 0, sh - 1)
                val = (
                    src[ya, xa] * (1 - tx) * (1 - ty)
                    + src[ya, xb] * tx * (1 - ty)
                    + src[yb, xa] * (1 - tx) * ty
                    + src[yb, xb] * tx * ty
                )
                assert out[oy, ox] == pytest.approx(val, abs=1e-12)

    def test_mask_refuses_bilinear(self):
        with pytest.raises(ValueError):
            resize(np.zeros((4, 4), bool), (8, 8), mode="bilinear")


class TestBBox:
    def test_bbox_of_empty(self):
        assert bbox_of(np.zeros((3, 3), bool)) is None

    def test_bbox_tight_half_open(self):
        m = np.zeros((6, 6), bool)
        m[2:4, 1:5] = True
        assert bbox_of(m) == BBox(1, 2, 5, 4)

    def test_pixel_box_floor_ceil(self):
        assert BBox(1.2, 0.8, 3.1, 2.0).pixel_box() == (1, 0, 4, 2)
