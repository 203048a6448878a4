"""Oracle tests for slice poses, sampling, plane intersection, and star polygons."""

import numpy as np
import pytest

from lvseg.errors import CoplanarityError, ParameterizationError, ValidationError
from lvseg.geometry import (PlaneFrame, Ray, SlicePlane, bilinear_sample,
                            intersect_planes, sample_along, star_polygon_radii)

from conftest import circle_contour


def random_plane(rng, label="SA", shape=(20, 24), spacing=1.5):
    basis = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    return SlicePlane(pixels=rng.normal(size=shape), origin=rng.normal(size=3) * 40,
                      row_dir=basis[:, 0], col_dir=basis[:, 1],
                      pixel_spacing=spacing, thickness=8.0, label=label)


def axial_plane(pixels, z=0.0, spacing=1.0, label="SA", origin_xy=(0.0, 0.0)):
    return SlicePlane(pixels=pixels, origin=[origin_xy[0], origin_xy[1], z],
                      row_dir=[1, 0, 0], col_dir=[0, 1, 0],
                      pixel_spacing=spacing, thickness=8.0, label=label)


class TestSlicePlane:
    def test_world_round_trip(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            plane = random_plane(rng)
            u = rng.uniform(-5, 30, size=7)
            v = rng.uniform(-5, 30, size=7)
            pts = plane.image_to_world(u, v)
            uu, vv = plane.world_to_image(pts)
            assert np.allclose(uu, u, atol=1e-9)
            assert np.allclose(vv, v, atol=1e-9)

    def test_scalar_forms(self):
        plane = axial_plane(np.zeros((4, 5)), z=3.0, spacing=2.0)
        p = plane.image_to_world(2.0, 1.0)
        assert p.shape == (3,)
        assert np.allclose(p, [4.0, 2.0, 3.0])
        u, v = plane.world_to_image(p)
        assert (u, v) == (2.0, 1.0)

    def test_world_to_image_discards_normal_component(self):
        plane = axial_plane(np.zeros((4, 4)), z=0.0)
        assert plane.world_to_image(np.array([1.0, 2.0, 55.0])) == (1.0, 2.0)

    def test_translated_moves_origin_and_content(self):
        rng = np.random.default_rng(1)
        plane = random_plane(rng)
        moved = plane.translated(3, -2)
        shift = plane.pixel_spacing * (3 * plane.row_dir - 2 * plane.col_dir)
        assert np.allclose(moved.origin, plane.origin + shift)
        # Content moves with the pose: pixel (u, v) now sits where the shift put it.
        assert np.allclose(moved.image_to_world(0, 0), plane.image_to_world(3, -2))
        # The pixel array itself is untouched and shared semantics preserved.
        assert moved.pixels is plane.pixels or np.array_equal(moved.pixels, plane.pixels)
        assert np.allclose(plane.origin + shift, moved.origin)

    def test_normal_unit_and_orthogonal(self):
        rng = np.random.default_rng(2)
        plane = random_plane(rng)
        n = plane.normal
        assert abs(np.linalg.norm(n) - 1) < 1e-12
        assert abs(n @ plane.row_dir) < 1e-12
        assert abs(n @ plane.col_dir) < 1e-12

    @pytest.mark.parametrize("kwargs", [
        dict(row_dir=[2, 0, 0]),
        dict(col_dir=[1, 0, 0]),
        dict(pixel_spacing=0.0),
        dict(pixel_spacing=-1.0),
        dict(label="CORONAL"),
        dict(pixels=np.zeros(5)),
        dict(pixels=np.zeros((1, 5))),
        dict(thickness=-1.0),
    ])
    def test_validation_errors(self, kwargs):
        base = dict(pixels=np.zeros((4, 4)), origin=[0, 0, 0], row_dir=[1, 0, 0],
                    col_dir=[0, 1, 0], pixel_spacing=1.0, thickness=8.0, label="SA")
        base.update(kwargs)
        with pytest.raises(ValidationError):
            SlicePlane(**base)


class TestBilinearSample:
    def test_exact_at_pixel_centres(self):
        rng = np.random.default_rng(3)
        img = rng.normal(size=(6, 7))
        v, u = np.mgrid[0:6, 0:7]
        out = bilinear_sample(img, u.ravel().astype(float), v.ravel().astype(float))
        assert np.allclose(out, img.ravel())

    def test_interpolates_linearly(self):
        img = np.array([[0.0, 2.0], [4.0, 6.0]])
        assert bilinear_sample(img, 0.5, 0.0)[0] == pytest.approx(1.0)
        assert bilinear_sample(img, 0.0, 0.5)[0] == pytest.approx(2.0)
        assert bilinear_sample(img, 0.5, 0.5)[0] == pytest.approx(3.0)
        assert bilinear_sample(img, 0.25, 0.75)[0] == pytest.approx(0.25 * 2 + 0.75 * 4 + 0.25 * 0.75 * 0)

    def test_nan_outside_footprint(self):
        img = np.ones((4, 4))
        out = bilinear_sample(img, np.array([-0.01, 3.01, 1.0]), np.array([0.0, 0.0, 4.0]))
        assert np.isnan(out[0]) and np.isnan(out[1]) and np.isnan(out[2])
        edge = bilinear_sample(img, np.array([0.0, 3.0]), np.array([3.0, 0.0]))
        assert np.all(np.isfinite(edge))


class TestRay:
    def test_direction_normalized(self):
        ray = Ray(start=[0, 0, 0], direction=[0, 0, 5], step=1.0, length=3)
        assert np.allclose(ray.direction, [0, 0, 1])

    @pytest.mark.parametrize("kwargs", [
        dict(direction=[0, 0, 0]),
        dict(step=0.0),
        dict(step=-2.0),
        dict(length=0),
    ])
    def test_validation(self, kwargs):
        base = dict(start=[0, 0, 0], direction=[1, 0, 0], step=1.0, length=4)
        base.update(kwargs)
        with pytest.raises(ValidationError):
            Ray(**base)


class TestSampleAlong:
    def test_linear_field(self):
        v, u = np.mgrid[0:8, 0:8]
        plane = axial_plane((3.0 * u + 1.0).astype(float), z=2.0, spacing=2.0)
        ray = Ray(start=plane.image_to_world(1.0, 4.0), direction=[1, 0, 0], step=2.0, length=5)
        vals = sample_along(plane, ray)
        # Step 2 mm = 1 px along u: u = 1, 2, 3, 4, 5.
        assert np.allclose(vals, 3.0 * np.arange(1, 6) + 1.0)

    def test_outside_samples_are_nan(self):
        plane = axial_plane(np.ones((4, 4)))
        ray = Ray(start=plane.image_to_world(2.0, 2.0), direction=[1, 0, 0], step=1.0, length=5)
        vals = sample_along(plane, ray)
        assert np.allclose(vals[:2], 1.0)
        assert np.all(np.isnan(vals[2:]))

    def test_coplanarity_enforced(self):
        plane = axial_plane(np.ones((4, 4)))
        with pytest.raises(CoplanarityError):
            sample_along(plane, Ray(start=[0, 0, 0], direction=[0, 0.1, 1], step=1.0, length=3))
        with pytest.raises(CoplanarityError):
            sample_along(plane, Ray(start=[0, 0, 1.0], direction=[1, 0, 0], step=1.0, length=3))


class TestIntersectPlanes:
    def test_orthogonal_planes_segment(self):
        sa = axial_plane(np.zeros((10, 10)), z=0.0)
        la = SlicePlane(pixels=np.zeros((10, 10)), origin=[0, 4.0, -3.0],
                        row_dir=[1, 0, 0], col_dir=[0, 0, 1],
                        pixel_spacing=1.0, thickness=8.0, label="LA4C")
        seg = intersect_planes(sa, la)
        assert seg is not None
        p0, p1 = seg
        for p in (p0, p1):
            assert abs(p[2]) < 1e-9       # on the SA plane
            assert abs(p[1] - 4.0) < 1e-9  # on the LA plane
        # Clipped to both footprints: x within [0, 9] on both.
        assert min(p0[0], p1[0]) >= -1e-9
        assert max(p0[0], p1[0]) <= 9 + 1e-9
        assert np.linalg.norm(p1 - p0) == pytest.approx(9.0, abs=1e-9)

    def test_parallel_planes_none(self):
        a = axial_plane(np.zeros((5, 5)), z=0.0)
        b = axial_plane(np.zeros((5, 5)), z=10.0)
        assert intersect_planes(a, b) is None

    def test_disjoint_footprints_none(self):
        sa = axial_plane(np.zeros((5, 5)), z=0.0)
        la = SlicePlane(pixels=np.zeros((5, 5)), origin=[0, 50.0, 0.0],
                        row_dir=[1, 0, 0], col_dir=[0, 0, 1],
                        pixel_spacing=1.0, thickness=8.0, label="LA2C")
        assert intersect_planes(sa, la) is None


class TestStarPolygonRadii:
    def test_circle_radii(self):
        poly = circle_contour((2.0, -1.0), 7.0, n=720)
        angles = np.random.default_rng(5).uniform(0, 2 * np.pi, size=32)
        radii = star_polygon_radii(poly, (2.0, -1.0), angles)
        assert np.allclose(radii, 7.0, atol=5e-4)

    def test_axis_aligned_square(self):
        half = 3.0
        sq = np.array([[half, half], [-half, half], [-half, -half], [half, -half]])
        angles = np.array([0.0, np.pi / 2, np.pi, np.pi / 4, 1.0])
        expected = half / np.maximum(np.abs(np.cos(angles)), np.abs(np.sin(angles)))
        radii = star_polygon_radii(sq, (0.0, 0.0), angles)
        assert np.allclose(radii, expected, atol=1e-9)

    def test_ray_through_vertex_counts_once(self):
        # Vertices exactly on the query angles: must resolve to one crossing.
        sq = np.array([[3.0, 0.0], [0.0, 3.0], [-3.0, 0.0], [0.0, -3.0]])
        radii = star_polygon_radii(sq, (0.0, 0.0), [0.0, np.pi / 2, np.pi, 3 * np.pi / 2])
        assert np.allclose(radii, 3.0, atol=1e-9)

    def test_center_outside_raises(self):
        poly = circle_contour((0.0, 0.0), 2.0, n=64)
        with pytest.raises(ParameterizationError):
            star_polygon_radii(poly, (5.0, 0.0), [np.pi / 2])

    def test_non_star_shape_raises(self):
        # A slot carved into the right side makes the +x ray cross three times.
        poly = np.array([[0.0, -2.0], [4.0, -2.0], [4.0, 2.0], [3.4, 2.0],
                         [3.4, -1.0], [2.8, -1.0], [2.8, 2.0], [0.0, 2.0]])
        with pytest.raises(ParameterizationError):
            star_polygon_radii(poly, (1.8, 0.0), [0.0])

    def test_input_validation(self):
        with pytest.raises(ValidationError):
            star_polygon_radii(np.zeros((2, 2)), (0, 0), [0.0])
        with pytest.raises(ValidationError):
            star_polygon_radii(np.zeros((5, 3)), (0, 0), [0.0])


class TestPlaneFrame:
    def test_round_trip_and_pixel_units(self):
        rng = np.random.default_rng(8)
        plane = random_plane(rng, spacing=1.34)
        frame = PlaneFrame.of(plane)
        pts = rng.normal(size=(11, 3)) * 30
        back = frame.to_world(frame.to_frame(pts))
        assert np.allclose(back, pts, atol=1e-9)
        # One +u pixel step in world space is one unit of the first frame axis.
        q0 = frame.to_frame(plane.image_to_world(0.0, 0.0))
        q1 = frame.to_frame(plane.image_to_world(1.0, 0.0))
        assert np.allclose(q1 - q0, [1.0, 0.0, 0.0], atol=1e-9)
        qv = frame.to_frame(plane.image_to_world(0.0, 1.0))
        assert np.allclose(qv - q0, [0.0, 1.0, 0.0], atol=1e-9)
