"""Slice geometry: oriented pixel grids, plane intersections, profile sampling.

Conventions used throughout the toolkit:

* World coordinates are in millimetres.
* Image coordinates (u, v) are continuous pixel units; ``u`` runs along
  ``row_dir`` and ``v`` along ``col_dir``, so ``pixels[v, u]`` addresses the
  sample whose centre sits at ``origin + pixel_spacing * (u*row_dir + v*col_dir)``.
* The valid footprint of a slice is the convex hull of pixel centres,
  u in [0, width-1], v in [0, height-1]; bilinear samples outside it are NaN.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import CoplanarityError, ParameterizationError, ValidationError

PLANE_LABELS = ("SA", "LA4C", "LA2C")

_UNIT_TOL = 1e-9
_DIR_TOL = 1e-6  # out-of-plane tolerance for ray directions
_POINT_TOL = 1e-6  # out-of-plane tolerance for ray start points, mm


def _vec3(x, name):
    v = np.asarray(x, dtype=float)
    if v.shape != (3,):
        raise ValidationError(f"{name} must be a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} contains non-finite values")
    return v


@dataclass
class SlicePlane:
    """A 2D image with a full 3D pose.

    pixels        (H, W) float array, ``pixels[v, u]``
    origin        world position (mm) of pixel (0, 0)
    row_dir       unit direction of increasing u
    col_dir       unit direction of increasing v, orthogonal to row_dir
    pixel_spacing isotropic in-plane spacing, mm/px
    thickness     slab thickness, mm
    label         one of "SA", "LA4C", "LA2C"
    """

    pixels: np.ndarray
    origin: np.ndarray
    row_dir: np.ndarray
    col_dir: np.ndarray
    pixel_spacing: float
    thickness: float
    label: str

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float)
        if self.pixels.ndim != 2 or min(self.pixels.shape) < 2:
            raise ValidationError(f"pixels must be 2D with at least 2x2 samples, got {self.pixels.shape}")
        self.origin = _vec3(self.origin, "origin")
        self.row_dir = _vec3(self.row_dir, "row_dir")
        self.col_dir = _vec3(self.col_dir, "col_dir")
        for name, d in (("row_dir", self.row_dir), ("col_dir", self.col_dir)):
            if abs(np.linalg.norm(d) - 1.0) > 1e-6:
                raise ValidationError(f"{name} must be a unit vector")
        if abs(float(np.dot(self.row_dir, self.col_dir))) > 1e-6:
            raise ValidationError("row_dir and col_dir must be orthogonal")
        if not (float(self.pixel_spacing) > 0):
            raise ValidationError("pixel_spacing must be positive")
        if not (float(self.thickness) >= 0):
            raise ValidationError("thickness must be non-negative")
        if self.label not in PLANE_LABELS:
            raise ValidationError(f"label must be one of {PLANE_LABELS}, got {self.label!r}")

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def normal(self):
        n = np.cross(self.row_dir, self.col_dir)
        return n / np.linalg.norm(n)

    def image_to_world(self, u, v):
        """Map continuous pixel coordinates to world mm. Accepts scalars or arrays."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        p = (self.origin[None, :]
             + u.reshape(-1, 1) * self.pixel_spacing * self.row_dir[None, :]
             + v.reshape(-1, 1) * self.pixel_spacing * self.col_dir[None, :])
        if u.ndim == 0:
            return p[0]
        return p

    def world_to_image(self, p):
        """Project world points into pixel coordinates, discarding the normal component."""
        p = np.asarray(p, dtype=float)
        single = p.ndim == 1
        d = p.reshape(-1, 3) - self.origin[None, :]
        u = d @ self.row_dir / self.pixel_spacing
        v = d @ self.col_dir / self.pixel_spacing
        if single:
            return float(u[0]), float(v[0])
        return u, v

    def translated(self, du, dv):
        """Return a copy shifted by (du, dv) pixels in-plane (content moves with it)."""
        shift = self.pixel_spacing * (du * self.row_dir + dv * self.col_dir)
        return replace(self, origin=self.origin + shift)


@dataclass
class Ray:
    """A sampled line: ``length`` samples at ``start + k*step*direction``."""

    start: np.ndarray
    direction: np.ndarray
    step: float
    length: int

    def __post_init__(self):
        self.start = _vec3(self.start, "start")
        self.direction = _vec3(self.direction, "direction")
        n = np.linalg.norm(self.direction)
        if n < _UNIT_TOL:
            raise ValidationError("ray direction must be non-zero")
        self.direction = self.direction / n
        if not (float(self.step) > 0):
            raise ValidationError("step must be positive")
        if int(self.length) < 1:
            raise ValidationError("length must be at least 1")
        self.length = int(self.length)


def bilinear_sample(pixels, u, v):
    """Bilinear interpolation at (u, v); NaN outside the pixel-centre footprint."""
    pixels = np.asarray(pixels, dtype=float)
    h, w = pixels.shape
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    out = np.full(u.shape, np.nan)
    ok = (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)
    if not np.any(ok):
        return out
    uu = u[ok]
    vv = v[ok]
    u0 = np.clip(np.floor(uu).astype(int), 0, w - 2)
    v0 = np.clip(np.floor(vv).astype(int), 0, h - 2)
    fu = uu - u0
    fv = vv - v0
    top = pixels[v0, u0] * (1 - fu) + pixels[v0, u0 + 1] * fu
    bot = pixels[v0 + 1, u0] * (1 - fu) + pixels[v0 + 1, u0 + 1] * fu
    out[ok] = top * (1 - fv) + bot * fv
    return out


def sample_along(img, ray):
    """Sample ``img`` along a coplanar ray.

    Returns a float vector of length ``ray.length``; samples outside the image
    footprint are NaN and get excluded from downstream error sums.
    """
    n = img.normal
    if abs(float(np.dot(ray.direction, n))) > _DIR_TOL:
        raise CoplanarityError("ray direction has an out-of-plane component")
    if abs(float(np.dot(ray.start - img.origin, n))) > _POINT_TOL:
        raise CoplanarityError("ray start does not lie in the slice plane")
    k = np.arange(ray.length, dtype=float)
    pts = ray.start[None, :] + (k * ray.step)[:, None] * ray.direction[None, :]
    u, v = img.world_to_image(pts)
    return bilinear_sample(img.pixels, u, v)


def _footprint_interval(plane, p0, d):
    """Parameter interval of line p0 + t*d clipped to the plane's footprint."""
    lo, hi = -np.inf, np.inf
    for direction, limit in ((plane.row_dir, plane.width - 1), (plane.col_dir, plane.height - 1)):
        c0 = float(np.dot(p0 - plane.origin, direction)) / plane.pixel_spacing
        rate = float(np.dot(d, direction)) / plane.pixel_spacing
        if abs(rate) < 1e-12:
            if c0 < 0 or c0 > limit:
                return None
            continue
        t0 = (0 - c0) / rate
        t1 = (limit - c0) / rate
        lo = max(lo, min(t0, t1))
        hi = min(hi, max(t0, t1))
    if lo >= hi:
        return None
    return lo, hi


def intersect_planes(a, b):
    """Intersection segment of two slice planes, clipped to both footprints.

    Returns (p0, p1) world endpoints, or None for parallel planes or an empty
    overlap.
    """
    na, nb = a.normal, b.normal
    d = np.cross(na, nb)
    d_norm = np.linalg.norm(d)
    if d_norm < 1e-9:
        return None
    d = d / d_norm
    # Point on the intersection line of {na.x = ca}, {nb.x = cb}.
    ca = float(np.dot(na, a.origin))
    cb = float(np.dot(nb, b.origin))
    cross = np.cross(na, nb)
    p0 = np.cross(ca * nb - cb * na, cross) / float(np.dot(cross, cross))
    ia = _footprint_interval(a, p0, d)
    ib = _footprint_interval(b, p0, d)
    if ia is None or ib is None:
        return None
    lo = max(ia[0], ib[0])
    hi = min(ia[1], ib[1])
    if hi - lo < 1e-9:
        return None
    return p0 + lo * d, p0 + hi * d


def star_polygon_radii(points_uv, center, angles):
    """Radial distances from ``center`` to a closed polygon along given angles.

    The polygon (N, 2) is traversed as a closed polyline. Each outgoing ray must
    cross it exactly once, otherwise the contour is not star-shaped about the
    centre and a ParameterizationError is raised.
    """
    pts = np.asarray(points_uv, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValidationError(f"polygon must be (N>=3, 2), got {pts.shape}")
    c = np.asarray(center, dtype=float)
    p1 = pts
    p2 = np.roll(pts, -1, axis=0)
    e = p2 - p1  # segment vectors
    rel = p1 - c
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    radii = np.empty(angles.shape)
    for i, th in enumerate(angles):
        d = np.array([np.cos(th), np.sin(th)])
        # Solve c + r*d = p1 + s*e, per segment: 2x2 cross-product form.
        denom = d[0] * e[:, 1] - d[1] * e[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (d[1] * rel[:, 0] - d[0] * rel[:, 1]) / denom
            r = (e[:, 1] * rel[:, 0] - e[:, 0] * rel[:, 1]) / denom
        # The s window carries a small slack so crossings that land exactly on
        # a shared polygon vertex cannot be missed by both adjacent segments.
        hit = (np.abs(denom) > 1e-12) & (s >= -1e-9) & (s < 1.0 + 1e-9) & (r > 1e-9)
        # Conversely such a crossing may register in both segments; collapse
        # hits at numerically the same point before counting.
        r_hits = np.sort(r[hit])
        distinct = [float(val) for k, val in enumerate(r_hits)
                    if k == 0 or val - r_hits[k - 1] > 1e-6 * max(1.0, float(val))]
        if len(distinct) != 1:
            raise ParameterizationError(
                f"contour is not star-shaped about {tuple(np.round(c, 3))}: "
                f"{len(distinct)} crossings at angle {th:.4f}")
        radii[i] = distinct[0]
    return radii


@dataclass(frozen=True)
class PlaneFrame:
    """An isotropic pixel-unit coordinate frame attached to a slice pose.

    Frame coordinates are (u, v, n) where u/v are the slice's pixel axes and n
    is the distance along the normal, all divided by ``pixel_spacing`` so one
    unit is one in-plane pixel in every direction.
    """

    origin: tuple
    row_dir: tuple
    col_dir: tuple
    pixel_spacing: float

    @classmethod
    def of(cls, plane):
        return cls(tuple(plane.origin), tuple(plane.row_dir), tuple(plane.col_dir),
                   float(plane.pixel_spacing))

    def _basis(self):
        r = np.array(self.row_dir)
        c = np.array(self.col_dir)
        n = np.cross(r, c)
        return r, c, n / np.linalg.norm(n)

    def to_frame(self, p):
        p = np.asarray(p, dtype=float)
        single = p.ndim == 1
        d = p.reshape(-1, 3) - np.array(self.origin)[None, :]
        r, c, n = self._basis()
        out = np.stack([d @ r, d @ c, d @ n], axis=1) / self.pixel_spacing
        return out[0] if single else out

    def to_world(self, q):
        q = np.asarray(q, dtype=float)
        single = q.ndim == 1
        q2 = q.reshape(-1, 3) * self.pixel_spacing
        r, c, n = self._basis()
        out = (np.array(self.origin)[None, :]
               + q2[:, 0:1] * r[None, :] + q2[:, 1:2] * c[None, :] + q2[:, 2:3] * n[None, :])
        return out[0] if single else out
