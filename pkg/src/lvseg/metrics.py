"""Segmentation evaluation: mask rasterization, Dice overlap, contour distance.

Masks are built from closed contours by even-odd scanline rasterization over
pixel centers, so a pixel (u, v) is inside when the point (u, v) lies inside
the polygon. The blood-pool mask is clipped to the LV (epicardial) mask so
blood pool and myocardium always partition the LV exactly.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def polygon_mask(contour_uv, shape):
    """Boolean mask of pixel centers inside a closed polygon.

    contour_uv: (N, 2) polygon vertices as (u, v) = (column, row), implicitly
    closed. shape: (height, width). Horizontal edges are ignored; edges are
    half-open in v so shared vertices are counted once.
    """
    pts = np.asarray(contour_uv, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValidationError(f"polygon must be (N>=3, 2), got {pts.shape}")
    if not np.isfinite(pts).all():
        raise ValidationError("polygon contains non-finite vertices")
    height, width = shape
    mask = np.zeros((height, width), dtype=bool)
    x1 = pts[:, 0]
    y1 = pts[:, 1]
    x2 = np.roll(x1, -1)
    y2 = np.roll(y1, -1)
    keep = y1 != y2
    x1, y1, x2, y2 = x1[keep], y1[keep], x2[keep], y2[keep]
    if x1.size == 0:
        return mask
    v_lo = max(0, int(np.ceil(min(y1.min(), y2.min()))))
    v_hi = min(height - 1, int(np.floor(max(y1.max(), y2.max()))))
    for v in range(v_lo, v_hi + 1):
        hit = ((y1 <= v) & (v < y2)) | ((y2 <= v) & (v < y1))
        if not hit.any():
            continue
        xs = x1[hit] + (v - y1[hit]) * (x2[hit] - x1[hit]) / (y2[hit] - y1[hit])
        xs.sort()
        for a, b in zip(xs[0::2], xs[1::2]):
            u_lo = max(0, int(np.ceil(a)))
            u_hi = min(width - 1, int(np.ceil(b)) - 1)
            if u_hi >= u_lo:
                mask[v, u_lo:u_hi + 1] = True
    return mask


@dataclass
class SegmentationMasks:
    """LV / blood-pool / myocardium masks for one SA slice."""

    lv: np.ndarray
    bp: np.ndarray
    myo: np.ndarray

    @classmethod
    def from_contours(cls, endo_uv, epi_uv, shape):
        lv = polygon_mask(epi_uv, shape)
        bp = polygon_mask(endo_uv, shape) & lv
        return cls(lv=lv, bp=bp, myo=lv & ~bp)


def dice(mask_a, mask_b):
    """Dice overlap of two boolean masks; two empty masks count as 1."""
    a = np.asarray(mask_a, dtype=bool)
    b = np.asarray(mask_b, dtype=bool)
    if a.shape != b.shape:
        raise ValidationError(f"mask shapes differ: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a, b).sum()) / total


def volumetric_dice(masks_a, masks_b):
    """Dice over a stack of per-slice masks pooled as one volume."""
    if len(masks_a) != len(masks_b) or not masks_a:
        raise ValidationError("mask stacks must be non-empty and equally long")
    return dice(np.stack(masks_a), np.stack(masks_b))


def _point_to_segments(points, seg_a, seg_b):
    """Distance from each point to the nearest of the given segments."""
    p = points[:, None, :]
    a = seg_a[None, :, :]
    d = seg_b[None, :, :] - a
    denom = np.maximum((d * d).sum(axis=2), 1e-300)
    s = np.clip(((p - a) * d).sum(axis=2) / denom, 0.0, 1.0)
    closest = a + s[:, :, None] * d
    return np.sqrt(((p - closest) ** 2).sum(axis=2)).min(axis=1)


def mean_contour_distance(contour_a, contour_b):
    """Symmetric mean distance between two closed contours.

    Averages the mean vertex-to-polyline distances in both directions; the
    result is in the units of the input coordinates.
    """
    a = np.asarray(contour_a, dtype=float)
    b = np.asarray(contour_b, dtype=float)
    for pts in (a, b):
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 8:
            raise ValidationError(f"contour must be (N>=8, 2), got {pts.shape}")
        if not np.isfinite(pts).all():
            raise ValidationError("contour contains non-finite vertices")
    d_ab = _point_to_segments(a, b, np.roll(b, -1, axis=0)).mean()
    d_ba = _point_to_segments(b, a, np.roll(a, -1, axis=0)).mean()
    return float(0.5 * (d_ab + d_ba))


def _mask_or_empty(contour_uv, shape):
    pts = np.asarray(contour_uv, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or not np.isfinite(pts).all():
        return np.zeros(shape, dtype=bool)
    return polygon_mask(pts, shape)


def infer_mask_shape(contour_stacks):
    """Smallest square grid that contains every contour point."""
    hi = 0.0
    for stack in contour_stacks:
        for contour in stack:
            pts = np.asarray(contour, dtype=float)
            if pts.size:
                hi = max(hi, float(np.max(pts)))
    side = int(np.ceil(hi)) + 2
    return (side, side)


def study_metrics(pred_endo, pred_epi, true_endo, true_epi, shape=None,
                  pixel_spacing=1.0):
    """Volumetric Dice and mean contour distances for a full SA stack.

    All contours are (N, 2) pixel coordinates on a common grid; per-slice
    contour distances are skipped (None) when either contour has fewer than 8
    points. Returns a dict with overall and per-slice values, distances in
    both px and mm.
    """
    n = len(true_endo)
    if not (len(pred_endo) == len(pred_epi) == len(true_epi) == n) or n == 0:
        raise ValidationError("prediction and truth stacks must be non-empty and equally long")
    if shape is None:
        shape = infer_mask_shape([pred_endo, pred_epi, true_endo, true_epi])

    per_slice = []
    pred_bp, pred_myo, true_bp, true_myo = [], [], [], []
    for k in range(n):
        lv_p = _mask_or_empty(pred_epi[k], shape)
        bp_p = _mask_or_empty(pred_endo[k], shape) & lv_p
        lv_t = _mask_or_empty(true_epi[k], shape)
        bp_t = _mask_or_empty(true_endo[k], shape) & lv_t
        pred_bp.append(bp_p)
        pred_myo.append(lv_p & ~bp_p)
        true_bp.append(bp_t)
        true_myo.append(lv_t & ~bp_t)

        entry = {"slice": k,
                 "dice_bp": dice(bp_p, bp_t),
                 "dice_myo": dice(pred_myo[-1], true_myo[-1]),
                 "mcd_endo_px": None, "mcd_epi_px": None}
        for key, pred, true in (("mcd_endo_px", pred_endo[k], true_endo[k]),
                                ("mcd_epi_px", pred_epi[k], true_epi[k])):
            pred = np.asarray(pred, dtype=float)
            true = np.asarray(true, dtype=float)
            if pred.ndim == 2 and pred.shape[0] >= 8 and true.shape[0] >= 8:
                entry[key] = mean_contour_distance(pred, true)
        per_slice.append(entry)

    def _pooled(key):
        vals = [e[key] for e in per_slice if e[key] is not None]
        return float(np.mean(vals)) if vals else float("nan")

    mcd_endo = _pooled("mcd_endo_px")
    mcd_epi = _pooled("mcd_epi_px")
    return {
        "dice_bp": volumetric_dice(pred_bp, true_bp),
        "dice_myo": volumetric_dice(pred_myo, true_myo),
        "mcd_endo_px": mcd_endo,
        "mcd_epi_px": mcd_epi,
        "mcd_endo_mm": mcd_endo * pixel_spacing,
        "mcd_epi_mm": mcd_epi * pixel_spacing,
        "pixel_spacing": float(pixel_spacing),
        "per_slice": per_slice,
    }
