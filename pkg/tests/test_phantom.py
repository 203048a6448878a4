"""Oracle tests for the procedural cardiac phantom and its ground truth."""

import numpy as np
import pytest

from lvseg import PhantomSpec, generate, inject_misalignment, truth_polar
from lvseg.errors import ValidationError
from lvseg.phantom import InfarctSpec, endo_radius_mm


class TestSpec:
    def test_slice_centres(self):
        spec = PhantomSpec()
        assert spec.slice_pitch_mm == 10.0
        assert np.array_equal(spec.sa_slice_centers_mm(), 10.0 + 10.0 * np.arange(8))

    def test_taper_is_linear_and_clipped(self):
        spec = PhantomSpec()
        assert endo_radius_mm(spec, 0.0) == 25.0
        assert endo_radius_mm(spec, 90.0) == 8.0
        assert endo_radius_mm(spec, 45.0) == pytest.approx(16.5)
        assert endo_radius_mm(spec, -10.0) == 25.0
        assert endo_radius_mm(spec, 200.0) == 8.0

    @pytest.mark.parametrize("kwargs", [
        dict(voxel_mm=0.0),
        dict(n_sa_slices=2),
        dict(slice_thickness_mm=0.0),
        dict(slice_gap_mm=-1.0),
        dict(wall_thickness_mm=0.0),
        dict(wall_thickness_mm=30.0),
        dict(noise_sigma=-0.1),
        dict(n_sa_slices=12),  # stack longer than the long axis
        dict(image_size_px=8),
        dict(infarct=InfarctSpec(transmurality=0.0)),
        dict(infarct=InfarctSpec(azimuth_span_deg=0.0)),
        dict(infarct=InfarctSpec(azimuth_span_deg=400.0)),
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ValidationError):
            PhantomSpec(**kwargs).validate()


class TestGenerate:
    def test_deterministic(self):
        a = generate(PhantomSpec(seed=5))
        b = generate(PhantomSpec(seed=5))
        for sa, sb in zip(a.lge_sa + [a.lge_la4c, a.lge_la2c] + a.cine_sa,
                          b.lge_sa + [b.lge_la4c, b.lge_la2c] + b.cine_sa):
            assert np.array_equal(sa.pixels, sb.pixels)
            assert np.array_equal(sa.origin, sb.origin)
        c = generate(PhantomSpec(seed=6))
        assert not np.array_equal(a.lge_sa[0].pixels, c.lge_sa[0].pixels)

    def test_noise_free_tissue_values(self, noise_free_study):
        # Slice 3 sits at z = 40 mm: inside the infarct's axial extent.
        px = noise_free_study.lge_sa[3].pixels
        assert px[47, 47] == 180.0   # blood pool centre
        assert px[47, 64] == 220.0   # mid-wall pixel inside the enhanced wedge
        assert px[47, 31] == 60.0    # mid-wall pixel opposite the wedge
        assert px[2, 2] == 20.0      # background corner

    def test_cine_has_no_enhancement_and_is_offset(self, noise_free_study):
        spec = noise_free_study.spec
        for s in noise_free_study.cine_sa:
            assert s.pixels.max() <= spec.intensities.blood
        t = noise_free_study.truth_cine
        for k, z in enumerate(spec.sa_slice_centers_mm()):
            endo = np.asarray(t.endo_sa[k])
            epi = np.asarray(t.epi_sa[k])
            center = endo[:, :2].mean(axis=0)
            assert np.allclose(center, [4.0, 0.0], atol=1e-6)
            r_endo = np.linalg.norm(endo[:, :2] - center, axis=1).mean()
            r_epi = np.linalg.norm(epi[:, :2] - center, axis=1).mean()
            assert r_endo == pytest.approx(0.95 * endo_radius_mm(spec, z), abs=1e-6)
            assert r_epi - r_endo == pytest.approx(1.15 * spec.wall_thickness_mm, abs=1e-6)

    def test_truth_circles_match_taper(self, study):
        spec = study.spec
        t = study.truth_lge
        for k, z in enumerate(spec.sa_slice_centers_mm()):
            endo = np.asarray(t.endo_sa[k])
            assert endo.shape == (720, 3)
            assert np.allclose(endo[:, 2], z)
            r = np.linalg.norm(endo[:, :2], axis=1)
            assert np.allclose(r, endo_radius_mm(spec, z), atol=1e-9)
            epi = np.asarray(t.epi_sa[k])
            r_epi = np.linalg.norm(epi[:, :2], axis=1)
            assert np.allclose(r_epi, endo_radius_mm(spec, z) + spec.wall_thickness_mm,
                               atol=1e-9)

    def test_la_planes_contain_long_axis(self, study):
        for plane, label in ((study.lge_la4c, "LA4C"), (study.lge_la2c, "LA2C")):
            assert plane.label == label
            n = plane.normal
            assert abs(n[2]) < 1e-9  # the z axis lies in both LA planes
            # The LV axis (x = y = 0) lies on the plane.
            for z in (0.0, 45.0, 90.0):
                d = np.array([0.0, 0.0, z]) - plane.origin
                assert abs(float(d @ n)) < 1e-6
        n4 = study.lge_la4c.normal
        n2 = study.lge_la2c.normal
        angle = np.degrees(np.arccos(abs(float(n4 @ n2))))
        assert angle == pytest.approx(60.0, abs=1e-6)

    def test_truth_polar_matches_analytic(self, study):
        spec = study.spec
        for k in (0, 4, 7):
            pc = truth_polar(study.truth_lge, k, 36)
            z = spec.sa_slice_centers_mm()[k]
            r_px = endo_radius_mm(spec, z) / spec.voxel_mm
            assert np.allclose(pc.endo_radius, r_px, atol=1e-6)
            assert np.allclose(pc.wall, spec.wall_thickness_mm / spec.voxel_mm, atol=1e-6)
            assert np.allclose(pc.center, [47.5, 47.5], atol=1e-6)
            assert len(pc.angles) == 36

    def test_noise_scales_with_sigma(self):
        lo = generate(PhantomSpec(seed=9, noise_sigma=0.01))
        hi = generate(PhantomSpec(seed=9, noise_sigma=0.10))
        # Compare the background corner patch variability.
        lo_sd = lo.lge_sa[0].pixels[:15, :15].std()
        hi_sd = hi.lge_sa[0].pixels[:15, :15].std()
        assert hi_sd > 5 * lo_sd


class TestInjectMisalignment:
    def test_bounds_and_determinism(self, study):
        moved, shifts = inject_misalignment(study.lge_sa, 4, seed=123)
        again, shifts2 = inject_misalignment(study.lge_sa, 4, seed=123)
        assert np.array_equal(shifts, shifts2)
        assert shifts.shape == (8, 2)
        assert np.all(np.abs(shifts) <= 4)
        for orig, new, (du, dv) in zip(study.lge_sa, moved, shifts):
            assert new.pixels is orig.pixels or np.array_equal(new.pixels, orig.pixels)
            shift = orig.pixel_spacing * (du * orig.row_dir + dv * orig.col_dir)
            assert np.allclose(new.origin, orig.origin + shift)

    def test_originals_untouched(self, study):
        before = [s.origin.copy() for s in study.lge_sa]
        inject_misalignment(study.lge_sa, 5, seed=1)
        for s, o in zip(study.lge_sa, before):
            assert np.array_equal(s.origin, o)

    def test_zero_shift_and_validation(self, study):
        moved, shifts = inject_misalignment(study.lge_sa, 0, seed=1)
        assert np.array_equal(shifts, np.zeros((8, 2), dtype=int))
        with pytest.raises(ValidationError):
            inject_misalignment(study.lge_sa, -1, seed=1)
