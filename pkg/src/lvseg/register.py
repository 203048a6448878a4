"""Translational cine-to-LGE registration by pattern intensity.

Pattern intensity scores the difference image of two windows: around every
pixel, squared differences of the difference image against its disc
neighbourhood (radius r, centre included) are passed through
delta^2 / (delta^2 + diff^2) and averaged. A structureless difference image
scores 1; edges in the difference image pull the score down. Windows are
min-max normalized to [0, 1] before scoring so the delta constant has a
consistent meaning across acquisitions; partial neighbourhoods at window
borders use their actual pixel count.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import RegistrationFailure, ValidationError


@dataclass(frozen=True)
class PatternIntensityParams:
    r: int = 5
    delta: float = 0.1

    def validate(self):
        if self.r < 1:
            raise ValidationError("pattern intensity radius must be >= 1")
        if not (self.delta > 0):
            raise ValidationError("pattern intensity delta must be positive")
        return self


@dataclass(frozen=True)
class Roi:
    """Pixel window [u0, u0+width) x [v0, v0+height)."""

    u0: int
    v0: int
    width: int
    height: int

    @property
    def u1(self):
        return self.u0 + self.width

    @property
    def v1(self):
        return self.v0 + self.height


@njit(cache=True)
def _pi_sum(diff, r, delta2):
    h, w = diff.shape
    r2 = r * r
    total = 0.0
    for y in range(h):
        for x in range(w):
            acc = 0.0
            cnt = 0
            for dy in range(-r, r + 1):
                yy = y + dy
                if yy < 0 or yy >= h:
                    continue
                for dx in range(-r, r + 1):
                    if dx * dx + dy * dy > r2:
                        continue
                    xx = x + dx
                    if xx < 0 or xx >= w:
                        continue
                    d = diff[y, x] - diff[yy, xx]
                    acc += delta2 / (delta2 + d * d)
                    cnt += 1
            total += acc / cnt
    return total / (h * w)


def pattern_intensity(window_a, window_b, params=PatternIntensityParams()):
    """Pattern intensity of two equally sized windows (already scaled to [0, 1])."""
    params.validate()
    a = np.ascontiguousarray(window_a, dtype=np.float64)
    b = np.ascontiguousarray(window_b, dtype=np.float64)
    if a.ndim != 2 or a.shape != b.shape:
        raise ValidationError(f"windows must be 2D with equal shape, got {a.shape} vs {b.shape}")
    if min(a.shape) < 1:
        raise ValidationError("empty window")
    return float(_pi_sum(a - b, params.r, params.delta * params.delta))


def normalize_window(window):
    """Min-max scale a window to [0, 1] (a constant window maps to zeros)."""
    w = np.asarray(window, dtype=float)
    lo = float(w.min())
    hi = float(w.max())
    if hi == lo:
        return np.zeros_like(w)
    return (w - lo) / (hi - lo)


def define_roi(epi_contour_uv, image):
    """Double the a-priori epi bounding box about its centre, clipped to the image."""
    pts = np.asarray(epi_contour_uv, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValidationError(f"contour must be (N>=3, 2), got {pts.shape}")
    u_min, v_min = pts.min(axis=0)
    u_max, v_max = pts.max(axis=0)
    cu = (u_min + u_max) / 2.0
    cv = (v_min + v_max) / 2.0
    hu = u_max - u_min  # doubled half-extent
    hv = v_max - v_min
    u0 = max(0, int(round(cu - hu)))
    v0 = max(0, int(round(cv - hv)))
    u1 = min(image.width, int(round(cu + hu)))
    v1 = min(image.height, int(round(cv + hv)))
    if u1 - u0 < 2 or v1 - v0 < 2:
        raise ValidationError("ROI collapsed after clipping")
    return Roi(u0=u0, v0=v0, width=u1 - u0, height=v1 - v0)


def register_translation(cine, lge, roi, search_radius_px=15, params=PatternIntensityParams()):
    """Exhaustive integer-shift search maximizing pattern intensity.

    The ROI window is fixed in the cine image; candidate windows in the LGE
    image are offset by (du, dv) and must lie fully inside it. Returns the
    arg-max shift, ties broken by smallest Euclidean norm then by (du, dv).
    Anatomy found at cine position p appears at p + shift in the LGE image.
    """
    if abs(cine.pixel_spacing - lge.pixel_spacing) > 1e-6 * max(cine.pixel_spacing, lge.pixel_spacing):
        raise ValidationError("cine must be resampled to the LGE pixel spacing first")
    if search_radius_px < 0:
        raise ValidationError("search_radius_px must be >= 0")
    win = cine.pixels[roi.v0:roi.v1, roi.u0:roi.u1]
    if win.size == 0:
        raise ValidationError("ROI is empty")
    cine_win = normalize_window(win)
    best = None
    for du in range(-search_radius_px, search_radius_px + 1):
        for dv in range(-search_radius_px, search_radius_px + 1):
            u0, v0 = roi.u0 + du, roi.v0 + dv
            if u0 < 0 or v0 < 0 or u0 + roi.width > lge.width or v0 + roi.height > lge.height:
                continue
            lge_win = normalize_window(lge.pixels[v0:v0 + roi.height, u0:u0 + roi.width])
            score = pattern_intensity(cine_win, lge_win, params)
            key = (-score, du * du + dv * dv, du, dv)
            if best is None or key < best:
                best = key
    if best is None:
        raise RegistrationFailure("no candidate window fits inside the LGE image")
    return best[2], best[3]


def propagate_contours(contour, shift):
    """Translate a-priori contours by a registration shift.

    Accepts an (N, 2) pixel point array (returns the shifted copy) or anything
    with a ``center`` attribute such as a polar contour (returns a copy with
    the centre shifted).
    """
    du, dv = shift
    if hasattr(contour, "center"):
        from dataclasses import replace
        return replace(contour, center=np.asarray(contour.center, dtype=float) + (du, dv))
    pts = np.asarray(contour, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError(f"contour must be (N, 2), got {pts.shape}")
    return pts + np.array([du, dv], dtype=float)
