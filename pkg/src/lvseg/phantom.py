"""Procedural cardiac phantom with exact ground truth.

The left ventricle is modelled as a tapered shell of revolution around the
world z axis: the endocardial radius shrinks linearly from base (z = 0) to
apex (z = lv_long_axis_mm) and the wall has constant thickness. A wedge of the
wall can be replaced by hyper-enhanced infarct, delimited in azimuth, long-axis
extent and transmural depth. Short-axis slices are rendered perpendicular to
the axis; two long-axis planes contain the axis. Every rendered slice is the
mean of sub-slab samples across the slice thickness with i.i.d. Gaussian noise
added per sub-sample, so slice averaging raises SNR exactly like thick-slice
acquisition.

A "cine" variant of the same anatomy is produced with a thicker wall, smaller
cavity and a global in-plane offset; its ground-truth contours serve as the
a-priori segmentation for the pipeline.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .geometry import SlicePlane, star_polygon_radii
from .profile_model import PolarContour

# Fixed cine-vs-LGE anatomy differences (systole-like remodelling + breath-hold offset).
CINE_WALL_SCALE = 1.15
CINE_ENDO_SCALE = 0.95
CINE_OFFSET_MM = (4.0, 0.0)

_TRUTH_POINTS = 720


@dataclass
class InfarctSpec:
    azimuth_center_deg: float = 0.0
    azimuth_span_deg: float = 100.0
    long_extent_mm: float = 50.0
    transmurality: float = 1.0


@dataclass
class TissueIntensities:
    blood: float = 180.0
    myo: float = 60.0
    infarct: float = 220.0
    background: float = 20.0


@dataclass
class PhantomSpec:
    voxel_mm: float = 1.34
    n_sa_slices: int = 8
    slice_thickness_mm: float = 7.0
    slice_gap_mm: float = 3.0
    lv_long_axis_mm: float = 90.0
    endo_radius_base_mm: float = 25.0
    endo_radius_apex_mm: float = 8.0
    wall_thickness_mm: float = 10.0
    infarct: InfarctSpec = field(default_factory=InfarctSpec)
    intensities: TissueIntensities = field(default_factory=TissueIntensities)
    noise_sigma: float = 0.05  # fraction of the blood mean
    seed: int = 0
    image_size_px: int = 96

    def validate(self):
        if self.voxel_mm <= 0:
            raise ValidationError("voxel_mm must be positive")
        if self.n_sa_slices < 3:
            raise ValidationError("need at least 3 SA slices")
        if self.slice_thickness_mm <= 0 or self.slice_gap_mm < 0:
            raise ValidationError("slice thickness must be positive, gap non-negative")
        if self.endo_radius_apex_mm <= 0 or self.endo_radius_base_mm <= 0:
            raise ValidationError("endo radii must be positive")
        if not (self.wall_thickness_mm > 0):
            raise ValidationError("wall thickness must be positive")
        if self.wall_thickness_mm >= self.endo_radius_base_mm:
            raise ValidationError("wall thickness must be smaller than the basal endo radius")
        if not (0 < self.infarct.transmurality <= 1.0):
            raise ValidationError("infarct transmurality must be in (0, 1]")
        if not (0 < self.infarct.azimuth_span_deg <= 360):
            raise ValidationError("infarct azimuth span must be in (0, 360]")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be non-negative")
        cover = (self.n_sa_slices - 1) * self.slice_pitch_mm
        if cover >= self.lv_long_axis_mm:
            raise ValidationError("SA stack does not fit inside the LV long axis")
        if self.image_size_px < 16:
            raise ValidationError("image_size_px too small")
        return self

    @property
    def slice_pitch_mm(self):
        return self.slice_thickness_mm + self.slice_gap_mm

    def sa_slice_centers_mm(self):
        """Slice-centre z positions, base to apex, centred on the shell."""
        z0 = (self.lv_long_axis_mm - (self.n_sa_slices - 1) * self.slice_pitch_mm) / 2.0
        return z0 + self.slice_pitch_mm * np.arange(self.n_sa_slices)


def endo_radius_mm(spec, z):
    """Analytic endocardial radius at axial position z (linear base-to-apex taper)."""
    frac = np.clip(np.asarray(z, dtype=float) / spec.lv_long_axis_mm, 0.0, 1.0)
    return spec.endo_radius_base_mm + (spec.endo_radius_apex_mm - spec.endo_radius_base_mm) * frac


@dataclass
class GroundTruth:
    """World-frame truth for one phantom rendering.

    endo_sa / epi_sa   per-SA-slice dense contours, (N, 3) mm
    infarct_sa         per-SA-slice boolean masks on the slice grid (None if no infarct)
    la                 label -> side ("left"/"right") -> surface ("endo"/"epi") -> (M, 3) mm
    sa_planes          the slice poses the contours refer to (pre-misalignment)
    """

    endo_sa: list
    epi_sa: list
    infarct_sa: list
    la: dict
    sa_planes: list
    pixel_spacing: float


@dataclass
class PhantomStudy:
    lge_sa: list
    lge_la4c: SlicePlane
    lge_la2c: SlicePlane
    cine_sa: list
    truth_lge: GroundTruth
    truth_cine: GroundTruth
    spec: PhantomSpec


def _tissue_means(spec, pts, center_xy, endo_scale, wall_scale, with_infarct):
    """Map world points to noiseless tissue intensities."""
    x = pts[:, 0] - center_xy[0]
    y = pts[:, 1] - center_xy[1]
    z = pts[:, 2]
    r = np.hypot(x, y)
    re = endo_radius_mm(spec, z) * endo_scale
    wall = spec.wall_thickness_mm * wall_scale
    in_z = (z >= 0.0) & (z <= spec.lv_long_axis_mm)
    blood = in_z & (r < re)
    myo = in_z & ~blood & (r <= re + wall)
    out = np.full(pts.shape[0], spec.intensities.background)
    out[blood] = spec.intensities.blood
    out[myo] = spec.intensities.myo
    if with_infarct:
        inf = spec.infarct
        centers = spec.sa_slice_centers_mm()
        zc = 0.5 * (centers[0] + centers[-1])
        phi = np.degrees(np.arctan2(y, x))
        dphi = np.abs((phi - inf.azimuth_center_deg + 180.0) % 360.0 - 180.0)
        hit = (myo
               & (dphi <= inf.azimuth_span_deg / 2.0)
               & (np.abs(z - zc) <= inf.long_extent_mm / 2.0)
               & (r <= re + inf.transmurality * wall))
        out[hit] = spec.intensities.infarct
    return out


def _render(spec, plane, rng, center_xy, endo_scale, wall_scale, with_infarct):
    """Thick-slice acquisition: the anatomy is extruded through each slab (the
    tissue map is evaluated at the slab centre, so the rendered boundary is
    exactly the ground-truth contour of that slice), while voxel noise is drawn
    per sub-layer and averaged across the thickness."""
    h, w = plane.pixels.shape
    uu, vv = np.meshgrid(np.arange(w), np.arange(h))
    base = plane.image_to_world(uu.ravel().astype(float), vv.ravel().astype(float))
    n_sub = max(1, int(round(spec.slice_thickness_mm / spec.voxel_mm)))
    sigma = spec.noise_sigma * spec.intensities.blood
    means = _tissue_means(spec, base, center_xy, endo_scale, wall_scale, with_infarct)
    acc = np.zeros(base.shape[0])
    for _ in range(n_sub):
        layer = means
        if sigma > 0:
            layer = means + rng.normal(0.0, sigma, means.shape)
        acc += layer
    return (acc / n_sub).reshape(h, w)


def _sa_pose(spec, z):
    half = (spec.image_size_px - 1) / 2.0 * spec.voxel_mm
    return dict(
        pixels=np.zeros((spec.image_size_px, spec.image_size_px)),
        origin=np.array([-half, -half, z]),
        row_dir=np.array([1.0, 0.0, 0.0]),
        col_dir=np.array([0.0, 1.0, 0.0]),
        pixel_spacing=spec.voxel_mm,
        thickness=spec.slice_thickness_mm,
        label="SA",
    )


def _la_pose(spec, azimuth_deg, label):
    half = (spec.image_size_px - 1) / 2.0 * spec.voxel_mm
    a = np.radians(azimuth_deg)
    lateral = np.array([np.cos(a), np.sin(a), 0.0])
    z0 = (spec.lv_long_axis_mm - (spec.image_size_px - 1) * spec.voxel_mm) / 2.0
    return dict(
        pixels=np.zeros((spec.image_size_px, spec.image_size_px)),
        origin=-half * lateral + np.array([0.0, 0.0, z0]),
        row_dir=lateral,
        col_dir=np.array([0.0, 0.0, 1.0]),
        pixel_spacing=spec.voxel_mm,
        thickness=spec.slice_thickness_mm,
        label=label,
    )


def _circle(cx, cy, r, z):
    th = np.linspace(0.0, 2.0 * np.pi, _TRUTH_POINTS, endpoint=False)
    return np.stack([cx + r * np.cos(th), cy + r * np.sin(th), np.full(th.shape, z)], axis=1)


def _truth_sa(spec, planes, center_xy, endo_scale, wall_scale, with_infarct):
    endo, epi, infarct = [], [], []
    for k, z in enumerate(spec.sa_slice_centers_mm()):
        re = float(endo_radius_mm(spec, z)) * endo_scale
        wall = spec.wall_thickness_mm * wall_scale
        endo.append(_circle(center_xy[0], center_xy[1], re, z))
        epi.append(_circle(center_xy[0], center_xy[1], re + wall, z))
        if with_infarct:
            plane = planes[k]
            h, w = plane.pixels.shape
            uu, vv = np.meshgrid(np.arange(w), np.arange(h))
            pts = plane.image_to_world(uu.ravel().astype(float), vv.ravel().astype(float))
            means = _tissue_means(spec, pts, center_xy, endo_scale, wall_scale, True)
            infarct.append((means == spec.intensities.infarct).reshape(h, w))
        else:
            infarct.append(None)
    return endo, epi, infarct


def _truth_la(spec, azimuths):
    out = {}
    z = np.arange(0.0, spec.lv_long_axis_mm + 1e-9, 0.5)
    re = endo_radius_mm(spec, z)
    rp = re + spec.wall_thickness_mm
    for label, az in azimuths.items():
        a = np.radians(az)
        lat = np.array([np.cos(a), np.sin(a), 0.0])
        curves = {}
        for side, sign in (("left", -1.0), ("right", 1.0)):
            curves[side] = {
                "endo": sign * re[:, None] * lat[None, :] + np.stack(
                    [np.zeros_like(z), np.zeros_like(z), z], axis=1),
                "epi": sign * rp[:, None] * lat[None, :] + np.stack(
                    [np.zeros_like(z), np.zeros_like(z), z], axis=1),
            }
        out[label] = curves
    return out


def generate(spec):
    """Render a full study (LGE SA stack, two LA planes, cine SA stack) plus truth.

    Deterministic for a given spec: the random stream is split per slice before
    rendering, so outputs do not depend on render order or threading.
    """
    spec.validate()
    n = spec.n_sa_slices
    children = np.random.SeedSequence(spec.seed).spawn(2 * n + 2)
    centers = spec.sa_slice_centers_mm()

    lge_sa = []
    for k, z in enumerate(centers):
        plane = SlicePlane(**_sa_pose(spec, z))
        rng = np.random.default_rng(children[k])
        plane.pixels[:] = _render(spec, plane, rng, (0.0, 0.0), 1.0, 1.0, True)
        lge_sa.append(plane)

    la4c = SlicePlane(**_la_pose(spec, 60.0, "LA4C"))
    la4c.pixels[:] = _render(spec, la4c, np.random.default_rng(children[n]), (0.0, 0.0), 1.0, 1.0, True)
    la2c = SlicePlane(**_la_pose(spec, 0.0, "LA2C"))
    la2c.pixels[:] = _render(spec, la2c, np.random.default_rng(children[n + 1]), (0.0, 0.0), 1.0, 1.0, True)

    cine_sa = []
    for k, z in enumerate(centers):
        plane = SlicePlane(**_sa_pose(spec, z))
        rng = np.random.default_rng(children[n + 2 + k])
        plane.pixels[:] = _render(spec, plane, rng, CINE_OFFSET_MM, CINE_ENDO_SCALE, CINE_WALL_SCALE, False)
        cine_sa.append(plane)

    endo_l, epi_l, inf_l = _truth_sa(spec, lge_sa, (0.0, 0.0), 1.0, 1.0, True)
    truth_lge = GroundTruth(endo_l, epi_l, inf_l,
                            _truth_la(spec, {"LA4C": 60.0, "LA2C": 0.0}),
                            list(lge_sa), spec.voxel_mm)
    endo_c, epi_c, inf_c = _truth_sa(spec, cine_sa, CINE_OFFSET_MM, CINE_ENDO_SCALE, CINE_WALL_SCALE, False)
    truth_cine = GroundTruth(endo_c, epi_c, inf_c, {}, list(cine_sa), spec.voxel_mm)

    return PhantomStudy(lge_sa, la4c, la2c, cine_sa, truth_lge, truth_cine, spec)


def inject_misalignment(slices, max_shift_px, seed):
    """Translate each slice by an independent uniform integer shift in [-m, m]^2.

    Returns (new_slices, shifts); the inputs are left untouched so ground truth
    holding the original poses stays valid.
    """
    m = int(max_shift_px)
    if m < 0:
        raise ValidationError("max_shift_px must be non-negative")
    rng = np.random.default_rng(seed)
    shifts = rng.integers(-m, m + 1, size=(len(slices), 2))
    moved = [s.translated(int(du), int(dv)) for s, (du, dv) in zip(slices, shifts)]
    return moved, shifts


def truth_polar(truth, slice_idx, n_theta):
    """Polar (radius, wall-thickness) read-out of a truth slice, in pixels.

    The centre is the mean of all endo+epi contour points projected into the
    slice's image frame, matching how the pipeline derives its own centre.
    """
    plane = truth.sa_planes[slice_idx]
    endo_u, endo_v = plane.world_to_image(truth.endo_sa[slice_idx])
    epi_u, epi_v = plane.world_to_image(truth.epi_sa[slice_idx])
    endo = np.stack([endo_u, endo_v], axis=1)
    epi = np.stack([epi_u, epi_v], axis=1)
    center = np.vstack([endo, epi]).mean(axis=0)
    angles = 2.0 * np.pi * np.arange(n_theta) / n_theta
    w = star_polygon_radii(endo, center, angles)
    r_epi = star_polygon_radii(epi, center, angles)
    return PolarContour(center=center, angles=angles, endo_radius=w, wall=r_epi - w)
