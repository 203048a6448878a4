"""Mask rasterization, Dice overlap, and contour-distance tests."""

import numpy as np
import pytest
from scipy.spatial import cKDTree

from lvseg.errors import ValidationError
from lvseg.metrics import (SegmentationMasks, dice, infer_mask_shape,
                           mean_contour_distance, polygon_mask, study_metrics,
                           volumetric_dice)


def square_contour(lo, hi):
    return np.array([[lo, lo], [hi, lo], [hi, hi], [lo, hi]], dtype=float)


def circle_uv(center, radius, n=720):
    th = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return np.column_stack([center[0] + radius * np.cos(th),
                            center[1] + radius * np.sin(th)])


def sample_polyline(corners, n):
    """Evenly resample a closed polyline into n points."""
    pts = np.asarray(corners, dtype=float)
    closed = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.linspace(0.0, cum[-1], n, endpoint=False)
    out = np.empty((n, 2))
    for d in range(2):
        out[:, d] = np.interp(s, cum, closed[:, d])
    return out


def mcd_oracle(a, b, n=20000):
    """Dense point-cloud symmetric mean distance between closed polylines."""
    da = sample_polyline(a, n)
    db = sample_polyline(b, n)
    d_ab = cKDTree(db).query(da)[0].mean()
    d_ba = cKDTree(da).query(db)[0].mean()
    return 0.5 * (d_ab + d_ba)


class TestPolygonMask:
    def test_half_pixel_square(self):
        mask = polygon_mask(square_contour(0.5, 3.5), (6, 6))
        expected = np.zeros((6, 6), dtype=bool)
        expected[1:4, 1:4] = True
        assert np.array_equal(mask, expected)

    def test_integer_square_area_matches_polygon_area(self):
        mask = polygon_mask(square_contour(1.0, 4.0), (8, 8))
        assert mask.sum() == 9  # half-open edges: pixels (1..3) x (1..3)
        assert np.array_equal(np.argwhere(mask).min(axis=0), [1, 1])
        assert np.array_equal(np.argwhere(mask).max(axis=0), [3, 3])

    def test_even_odd_pentagram_center_outside(self):
        order = [0, 2, 4, 1, 3]
        th = np.array([2.0 * np.pi * k / 5 for k in order])
        star = np.column_stack([10 + 10 * np.cos(th), 10 + 10 * np.sin(th)])
        mask = polygon_mask(star, (21, 21))
        assert not mask[10, 10]          # doubly-covered core is outside
        assert mask[10, 17]              # a point inside one arm

    def test_clipped_to_image(self):
        mask = polygon_mask(square_contour(-5.0, 2.5), (4, 4))
        expected = np.zeros((4, 4), dtype=bool)
        expected[0:3, 0:3] = True
        assert np.array_equal(mask, expected)

    def test_orientation_irrelevant(self):
        ccw = circle_uv((8, 8), 5.0)
        cw = ccw[::-1]
        assert np.array_equal(polygon_mask(ccw, (16, 16)),
                              polygon_mask(cw, (16, 16)))

    @pytest.mark.parametrize("pts", [
        np.zeros((2, 2)), np.zeros((4, 3)),
        np.array([[0.0, 0.0], [1.0, np.nan], [1.0, 1.0]]),
    ])
    def test_validation(self, pts):
        with pytest.raises(ValidationError):
            polygon_mask(pts, (8, 8))


class TestDice:
    def test_identity_one(self):
        a = polygon_mask(circle_uv((10, 10), 6.0), (21, 21))
        assert dice(a, a) == 1.0

    def test_disjoint_zero(self):
        a = np.zeros((10, 10), dtype=bool)
        b = np.zeros((10, 10), dtype=bool)
        a[:3] = True
        b[6:] = True
        assert dice(a, b) == 0.0

    def test_overlapping_squares_half(self):
        a = np.zeros((20, 20), dtype=bool)
        b = np.zeros((20, 20), dtype=bool)
        a[0:10, 0:10] = True
        b[0:10, 5:15] = True
        assert dice(a, b) == 2 * 50 / 200 == 0.5

    def test_both_empty_one(self):
        z = np.zeros((5, 5), dtype=bool)
        assert dice(z, z) == 1.0
        assert dice(z, ~z) == 0.0

    def test_symmetric_and_monotone(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = rng.random((16, 16)) < 0.4
            b = a & (rng.random((16, 16)) < 0.5)
            assert dice(a, b) == dice(b, a)
            prev = dice(a, b)
            missing = np.argwhere(a & ~b)
            if missing.size:
                grow = b.copy()
                grow[tuple(missing[0])] = True
                assert dice(a, grow) > prev

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            dice(np.zeros((4, 4), bool), np.zeros((5, 4), bool))


class TestVolumetricDice:
    def test_identical_stacks(self):
        m = polygon_mask(circle_uv((8, 8), 5.0), (16, 16))
        assert volumetric_dice([m, m, m], [m, m, m]) == 1.0

    def test_empty_pair_does_not_dilute(self):
        m = polygon_mask(circle_uv((8, 8), 5.0), (16, 16))
        z = np.zeros_like(m)
        assert volumetric_dice([m, z, m], [m, z, m]) == 1.0

    def test_direct_count_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            stack_a = [rng.random((12, 12)) < 0.5 for _ in range(4)]
            stack_b = [rng.random((12, 12)) < 0.5 for _ in range(4)]
            inter = sum(int((a & b).sum()) for a, b in zip(stack_a, stack_b))
            total = sum(int(a.sum()) + int(b.sum())
                        for a, b in zip(stack_a, stack_b))
            assert volumetric_dice(stack_a, stack_b) == pytest.approx(
                2.0 * inter / total, rel=1e-12)

    def test_length_mismatch(self):
        m = np.zeros((4, 4), bool)
        with pytest.raises(ValidationError):
            volumetric_dice([m, m], [m])
        with pytest.raises(ValidationError):
            volumetric_dice([], [])


class TestMeanContourDistance:
    def test_identical_zero(self):
        c = circle_uv((0, 0), 20.0)
        assert mean_contour_distance(c, c) == 0.0

    def test_concentric_circles(self):
        a = circle_uv((0, 0), 20.0, n=2000)
        b = circle_uv((0, 0), 21.0, n=2000)
        assert mean_contour_distance(a, b) == pytest.approx(1.0, abs=0.01)

    def test_translated_squares_match_dense_oracle(self):
        sq = square_contour(0.0, 10.0)
        shifted = sq + np.array([2.0, 0.0])
        dense_a = sample_polyline(sq, 2000)
        dense_b = sample_polyline(shifted, 2000)
        got = mean_contour_distance(dense_a, dense_b)
        assert got == pytest.approx(mcd_oracle(sq, shifted), abs=0.02)

    def test_symmetric(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            a = circle_uv(rng.uniform(-3, 3, 2), rng.uniform(5, 15), n=64)
            b = circle_uv(rng.uniform(-3, 3, 2), rng.uniform(5, 15), n=48)
            assert mean_contour_distance(a, b) == mean_contour_distance(b, a)

    def test_triangle_inequality_spot_checks(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            contours = []
            for _ in range(3):
                center = rng.uniform(-2, 2, 2)
                radius = rng.uniform(8, 14)
                wobble = 1.0 + 0.1 * rng.standard_normal(180)
                th = np.linspace(0, 2 * np.pi, 180, endpoint=False)
                contours.append(np.column_stack(
                    [center[0] + radius * wobble * np.cos(th),
                     center[1] + radius * wobble * np.sin(th)]))
            a, b, c = contours
            assert mean_contour_distance(a, c) <= (
                mean_contour_distance(a, b) + mean_contour_distance(b, c) + 0.05)

    @pytest.mark.parametrize("bad", [
        np.zeros((7, 2)),
        np.zeros((5, 3)),
        np.full((10, 2), np.nan),
    ])
    def test_validation(self, bad):
        with pytest.raises(ValidationError):
            mean_contour_distance(bad, circle_uv((0, 0), 5.0))


class TestSegmentationMasks:
    def test_partition_exact(self):
        masks = SegmentationMasks.from_contours(circle_uv((16, 16), 6.0),
                                                circle_uv((16, 16), 11.0),
                                                (32, 32))
        assert np.array_equal(masks.bp | masks.myo, masks.lv)
        assert not (masks.bp & masks.myo).any()
        assert masks.bp.sum() + masks.myo.sum() == masks.lv.sum()
        assert masks.bp.sum() > 0 and masks.myo.sum() > 0

    def test_endo_clipped_to_lv(self):
        # Endo poking outside epi still partitions exactly.
        masks = SegmentationMasks.from_contours(circle_uv((20, 16), 6.0),
                                                circle_uv((16, 16), 8.0),
                                                (32, 32))
        assert np.array_equal(masks.bp | masks.myo, masks.lv)
        assert not masks.bp[~masks.lv].any()


class TestStudyMetrics:
    def _stacks(self):
        endo = [circle_uv((16, 16), 5.0 + k) for k in range(3)]
        epi = [circle_uv((16, 16), 9.0 + k) for k in range(3)]
        return endo, epi

    def test_identical_perfect(self):
        endo, epi = self._stacks()
        out = study_metrics(endo, epi, endo, epi, shape=(32, 32),
                            pixel_spacing=1.4)
        assert out["dice_bp"] == 1.0 and out["dice_myo"] == 1.0
        assert out["mcd_endo_px"] == 0.0 and out["mcd_epi_px"] == 0.0
        assert out["mcd_endo_mm"] == 0.0
        assert len(out["per_slice"]) == 3
        assert all(e["dice_myo"] == 1.0 for e in out["per_slice"])

    def test_known_offsets(self):
        endo, epi = self._stacks()
        pred_endo = [c + np.array([0.5, 0.0]) for c in endo]
        out = study_metrics(pred_endo, epi, endo, epi, shape=(32, 32),
                            pixel_spacing=2.0)
        assert 0.2 < out["mcd_endo_px"] < 0.5
        assert out["mcd_endo_mm"] == pytest.approx(2.0 * out["mcd_endo_px"])
        assert out["mcd_epi_px"] == 0.0
        assert out["dice_bp"] < 1.0

    def test_shape_inference_matches_explicit(self):
        endo, epi = self._stacks()
        pred_endo = [c + 0.3 for c in endo]
        auto = study_metrics(pred_endo, epi, endo, epi)
        side = infer_mask_shape([pred_endo, epi, endo, epi])
        explicit = study_metrics(pred_endo, epi, endo, epi, shape=side)
        assert auto["dice_myo"] == explicit["dice_myo"]
        assert auto["dice_bp"] == explicit["dice_bp"]

    def test_length_mismatch(self):
        endo, epi = self._stacks()
        with pytest.raises(ValidationError):
            study_metrics(endo[:2], epi, endo, epi)
