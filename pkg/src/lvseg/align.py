"""Breath-hold misalignment correction.

Each SA slice may be translated in-plane relative to the true anatomy. Because
an in-plane translation leaves the infinite plane unchanged, the intersection
line between an SA slice and an LA slice is fixed; only where the image content
sits along that line moves. We therefore sample both images along their
intersection segment, score the agreement with a normalized mean of squared
differences, and search integer pixel shifts exhaustively.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSampleError, ValidationError
from .geometry import Ray, intersect_planes, sample_along

MIN_SEGMENT_SAMPLES = 8


def normalized_mssd(a, b):
    """Mean squared difference after standardizing both vectors.

    NaN entries are dropped jointly. Both inputs need >= 8 valid paired samples
    and non-zero spread; a flat vector raises DegenerateSampleError.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValidationError(f"length mismatch: {a.shape} vs {b.shape}")
    ok = np.isfinite(a) & np.isfinite(b)
    if int(ok.sum()) < MIN_SEGMENT_SAMPLES:
        raise ValidationError(f"need >= {MIN_SEGMENT_SAMPLES} valid paired samples, got {int(ok.sum())}")
    a = a[ok]
    b = b[ok]
    sa = a.std()
    sb = b.std()
    if sa == 0.0 or sb == 0.0:
        raise DegenerateSampleError("zero standard deviation in profile sample")
    a = (a - a.mean()) / sa
    b = (b - b.mean()) / sb
    return float(np.mean((a - b) ** 2))


@dataclass
class AlignmentResult:
    sa_shifts: np.ndarray      # (n_sa, 2) int, cumulative (du, dv) applied per slice
    la_shifts: np.ndarray      # (n_la, 2) int
    unalignable: list          # per SA slice: True if no usable LA segment existed
    residual: float            # total normalized MSSD at the final configuration
    passes: int                # SA passes actually executed
    residual_history: list     # total residual after each pass (SA passes then LA pass)


def _segment_ray(target, pair):
    p0, p1 = pair
    d = p1 - p0
    dist = float(np.linalg.norm(d))
    length = int(np.floor(dist / target.pixel_spacing)) + 1
    if length < MIN_SEGMENT_SAMPLES:
        return None
    return Ray(start=p0, direction=d, step=target.pixel_spacing, length=length)


def _usable(vals_a, vals_b):
    ok = np.isfinite(vals_a) & np.isfinite(vals_b)
    if int(ok.sum()) < MIN_SEGMENT_SAMPLES:
        return False
    if vals_a[ok].std() == 0.0 or vals_b[ok].std() == 0.0:
        return False
    return True


def _segments_for(target, references):
    """Intersection rays between `target` and each reference, with reference samples."""
    segs = []
    for ref in references:
        pair = intersect_planes(target, ref)
        if pair is None:
            continue
        ray = _segment_ray(target, pair)
        if ray is None:
            continue
        ref_vals = sample_along(ref, ray)
        segs.append((ray, ref_vals))
    return segs


def _slice_cost(target, segs, du, dv):
    """Summed normalized MSSD for `target` content shifted by (du, dv).

    Candidate shifts translate the slice origin, which is equivalent to
    sampling the unshifted image at points displaced by -shift. Returns None
    when any segment that must stay usable becomes unusable (inadmissible
    candidate).
    """
    delta = target.pixel_spacing * (du * target.row_dir + dv * target.col_dir)
    total = 0.0
    for ray, ref_vals in segs:
        moved = Ray(start=ray.start - delta, direction=ray.direction, step=ray.step, length=ray.length)
        tgt_vals = sample_along(target, moved)
        if not _usable(tgt_vals, ref_vals):
            return None
        total += normalized_mssd(tgt_vals, ref_vals)
    return total


def _best_shift(target, references, radius):
    """Exhaustive integer search; ties broken by smallest Euclidean then (du, dv)."""
    segs = [s for s in _segments_for(target, references)
            if _usable(sample_along(target, s[0]), s[1])]
    if not segs:
        return None, None
    best = None
    for du in range(-radius, radius + 1):
        for dv in range(-radius, radius + 1):
            cost = _slice_cost(target, segs, du, dv)
            if cost is None:
                continue
            key = (cost, du * du + dv * dv, du, dv)
            if best is None or key < best:
                best = key
    if best is None:
        return None, None
    return (best[2], best[3]), best[0]


def total_residual(sa, la):
    """Total normalized MSSD over all usable SA-LA intersection segments."""
    total = 0.0
    for s in sa:
        for ray, ref_vals in _segments_for(s, la):
            vals = sample_along(s, ray)
            if _usable(vals, ref_vals):
                total += normalized_mssd(vals, ref_vals)
    return total


def realign(sa, la, search_radius_px=10, max_passes=3, realign_la=True):
    """Greedy per-slice exhaustive realignment of an SA stack against LA slices.

    SA slices are optimized in turn against the fixed LA slices for up to
    ``max_passes`` passes (stopping early once a pass moves nothing), then one
    optional symmetric pass realigns each LA slice against the corrected stack.
    The total residual is non-increasing from pass to pass. Slices with no
    usable intersection segment are flagged unalignable and keep shift (0, 0).
    """
    if search_radius_px < 0 or max_passes < 1:
        raise ValidationError("search_radius_px must be >= 0 and max_passes >= 1")
    cur_sa = list(sa)
    cur_la = list(la)
    n = len(cur_sa)
    sa_shifts = np.zeros((n, 2), dtype=int)
    la_shifts = np.zeros((len(cur_la), 2), dtype=int)
    unalignable = [False] * n
    history = []
    passes = 0

    for _ in range(max_passes):
        passes += 1
        moved = False
        for i in range(n):
            shift, _cost = _best_shift(cur_sa[i], cur_la, search_radius_px)
            if shift is None:
                unalignable[i] = True
                continue
            unalignable[i] = False
            if shift != (0, 0):
                cur_sa[i] = cur_sa[i].translated(*shift)
                sa_shifts[i] += shift
                moved = True
        history.append(total_residual(cur_sa, cur_la))
        if not moved:
            break

    if realign_la and cur_la:
        for j in range(len(cur_la)):
            shift, _cost = _best_shift(cur_la[j], cur_sa, search_radius_px)
            if shift is None or shift == (0, 0):
                continue
            cur_la[j] = cur_la[j].translated(*shift)
            la_shifts[j] += shift
        history.append(total_residual(cur_sa, cur_la))

    result = AlignmentResult(sa_shifts=sa_shifts, la_shifts=la_shifts,
                             unalignable=unalignable,
                             residual=history[-1] if history else 0.0,
                             passes=passes, residual_history=history)
    return cur_sa, cur_la, result
