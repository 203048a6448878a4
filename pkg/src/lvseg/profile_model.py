"""Parametric myocardial intensity-profile model and edge detection.

A ray cast from the blood-pool centre outward crosses w pixels of blood, then
t pixels of myocardium whose wall may contain an enhanced (infarcted) stretch
of s pixels starting d pixels past the endocardium. ``build_template`` renders
that model as a 1D intensity vector; detection fits (w, t, s, d) per ray by
exhaustive search over (s, d) inside a narrow (w, t) band and couples the rays
with a smoothness energy minimized by iterated conditional modes (ICM).

Intensity classes (normal myocardium, blood, enhancement, and the transition
value between dark and bright tissue) are estimated from the pixels inside the
propagated epicardial contours via Otsu's threshold and a 1D 2-means split.

Short-axis rays form a cyclic chain (first and second finite differences of
both w and t are penalized); long-axis profiles form two open chains, one per
side of the central axis, where w is free to drift (only its second difference
is penalized) because the blood pool genuinely narrows toward the apex.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateHistogramError,
    NumericFailure,
    ValidationError,
)
from .geometry import bilinear_sample
from .metrics import polygon_mask

logger = logging.getLogger(__name__)

DEFAULT_N_THETA = 79
SA_BAND = 7
LA_BAND = 9
DEFAULT_LAMBDA = 0.005
# Smoothness term weights (first-order w, second-order w, first-order t,
# second-order t). LA chains drop the first-order w term.
SA_TERM_WEIGHTS = (1.0, 1.0, 1.0, 1.0)
LA_TERM_WEIGHTS = (0.0, 1.0, 1.0, 1.0)


# ---------------------------------------------------------------------------
# Model types


@dataclass(frozen=True)
class IntensityModel:
    """Tissue intensity classes: myocardium, blood pool, enhancement, and the
    transition value used for boundary pixels."""

    myo: float
    blood: float
    enhan: float
    thres: float

    def __post_init__(self):
        if not (self.myo <= self.thres <= self.blood <= self.enhan):
            raise ValidationError(
                f"intensity classes must satisfy myo <= thres <= blood <= enhan, "
                f"got ({self.myo}, {self.thres}, {self.blood}, {self.enhan})"
            )


@dataclass(frozen=True)
class TemplateParams:
    """Per-ray profile parameters, in pixels along the ray.

    blood: blood-pool extent w; wall: myocardial thickness t; enhan: enhanced
    stretch s within the wall; gap: healthy rim d between endocardium and the
    enhancement.
    """

    blood: int
    wall: int
    enhan: int = 0
    gap: int = 0

    def __post_init__(self):
        w, t, s, d = self.blood, self.wall, self.enhan, self.gap
        if w < 1 or t < 1:
            raise ValidationError(f"blood and wall extents must be >= 1 px, got w={w}, t={t}")
        if s < 0 or d < 0 or s > t or d + s > t:
            raise ValidationError(f"need 0 <= s <= t and d + s <= t, got (w={w}, t={t}, s={s}, d={d})")


@dataclass
class PolarContour:
    """Radial myocardium parameterization about a fixed centre (pixel units)."""

    center: np.ndarray        # (2,) (u, v)
    angles: np.ndarray        # (n,) radians
    endo_radius: np.ndarray   # (n,) px, = w
    wall: np.ndarray          # (n,) px, = t

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.angles = np.asarray(self.angles, dtype=float)
        self.endo_radius = np.asarray(self.endo_radius, dtype=float)
        self.wall = np.asarray(self.wall, dtype=float)
        n = self.angles.shape[0]
        if self.center.shape != (2,) or self.endo_radius.shape != (n,) or self.wall.shape != (n,):
            raise ValidationError("inconsistent polar contour shapes")
        if not (np.all(self.endo_radius > 0) and np.all(self.wall > 0)):
            raise ValidationError("polar contour requires endo_radius > 0 and wall > 0 everywhere")

    @property
    def n_theta(self):
        return self.angles.shape[0]

    def ray_dirs(self):
        return np.stack([np.cos(self.angles), np.sin(self.angles)], axis=1)

    def endo_points_uv(self):
        return self.center[None, :] + self.endo_radius[:, None] * self.ray_dirs()

    def epi_points_uv(self):
        r = self.endo_radius + self.wall
        return self.center[None, :] + r[:, None] * self.ray_dirs()


@dataclass
class AxialContour:
    """Myocardium parameterization along the long-axis central axis, one side.

    ``l`` is the (densified) slice location parameter, strictly increasing
    base to apex; ``axis_uv`` the central-axis point and ``ray_dir_uv`` the
    in-plane unit ray direction at each l; blood/wall are w(l)/t(l) in px.
    """

    side: str                 # "left" | "right"
    l: np.ndarray             # (n,)
    axis_uv: np.ndarray       # (n, 2)
    ray_dir_uv: np.ndarray    # (n, 2)
    blood: np.ndarray         # (n,) px
    wall: np.ndarray          # (n,) px

    def __post_init__(self):
        self.l = np.asarray(self.l, dtype=float)
        if np.any(np.diff(self.l) <= 0):
            raise ValidationError("axial contour locations must be strictly increasing")
        if not (np.all(self.blood > 0) and np.all(self.wall > 0)):
            raise ValidationError("axial contour requires blood > 0 and wall > 0 everywhere")

    def endo_points_uv(self):
        return self.axis_uv + self.blood[:, None] * self.ray_dir_uv

    def epi_points_uv(self):
        return self.axis_uv + (self.blood + self.wall)[:, None] * self.ray_dir_uv


@dataclass
class EdgePoint:
    """A weighted myocardial edge point in world coordinates."""

    position: np.ndarray      # (3,) mm
    kind: str                 # "endo" | "epi"
    source: str               # "SA" | "LA4C" | "LA2C"
    strength: float           # raw edge strength, NaN when neighbors invalid
    weight: float = np.nan    # filled by normalize_edge_weights
    slice_index: int = -1     # SA slice index, -1 for LA
    ray: int = -1             # ray / site index within its chain


# ---------------------------------------------------------------------------
# Templates and matching


def build_template(params, model, total_len):
    """Render TemplateParams as an intensity vector of length total_len.

    Layout: w blood pixels, d myocardium pixels, s enhancement pixels, then
    myocardium out to total_len. Wherever a bright run (blood or enhancement)
    is followed by a dark run, the dark run's first pixel carries the
    transition value.
    """
    w, t, s, d = params.blood, params.wall, params.enhan, params.gap
    if total_len < w + t:
        raise ValidationError(f"total_len must be >= w + t = {w + t}, got {total_len}")
    out = np.full(int(total_len), float(model.myo))
    out[:w] = model.blood
    if s == 0:
        out[w] = model.thres
        return out
    if d == 0:
        out[w:w + s] = model.enhan
        if t - s > 0:
            out[w + s] = model.thres
        elif total_len > w + t:
            out[w + t] = model.thres
        return out
    out[w] = model.thres
    out[w + d:w + d + s] = model.enhan
    if t - d - s > 0:
        out[w + d + s] = model.thres
    elif total_len > w + t:
        out[w + t] = model.thres
    return out


def match_error(template, sample, w, t):
    """Plain mean of squared differences over the first w + t positions.

    Non-finite sample positions are skipped; if none are finite the error is
    +inf.
    """
    template = np.asarray(template, dtype=float)
    sample = np.asarray(sample, dtype=float)
    m = int(w) + int(t)
    if template.shape[0] < m:
        raise ValidationError(f"template length {template.shape[0]} < w + t = {m}")
    if sample.shape[0] < m:
        raise ValidationError(f"sample length {sample.shape[0]} < w + t = {m}")
    seg = sample[:m]
    ok = np.isfinite(seg)
    if not ok.any():
        return float("inf")
    diff = template[:m][ok] - seg[ok]
    return float(np.mean(diff * diff))


# ---------------------------------------------------------------------------
# Intensity estimation


def otsu_threshold(counts, bin_centers):
    """Threshold maximizing between-class variance over a 256-bin histogram.

    Candidate k splits bins into [0, k) and [k, 256); both classes must be
    nonempty. Ties resolve to the lowest threshold. Returns bin_centers[k].
    """
    counts = np.asarray(counts, dtype=float)
    bin_centers = np.asarray(bin_centers, dtype=float)
    if counts.shape != bin_centers.shape or counts.ndim != 1:
        raise ValidationError("counts and bin_centers must be equal-length 1D arrays")
    if np.count_nonzero(counts) < 2:
        raise DegenerateHistogramError("histogram needs at least two nonempty bins")
    cum_n = np.cumsum(counts)
    cum_x = np.cumsum(counts * bin_centers)
    total_n = cum_n[-1]
    total_x = cum_x[-1]
    n0 = cum_n[:-1]              # class [0, k) for k = 1..len-1
    n1 = total_n - n0
    valid = (n0 > 0) & (n1 > 0)
    mu0 = np.divide(cum_x[:-1], n0, out=np.zeros_like(n0), where=n0 > 0)
    mu1 = np.divide(total_x - cum_x[:-1], n1, out=np.zeros_like(n1), where=n1 > 0)
    score = np.where(valid, n0 * n1 * (mu0 - mu1) ** 2, -np.inf)
    k = int(np.argmax(score)) + 1
    return float(bin_centers[k])


def estimate_intensities(sa_stack, epi_contours_uv, min_pool=100):
    """Estimate the IntensityModel from pixels inside the epicardial contours.

    Pools every pixel inside the (coarse) epicardial contour across all SA
    slices, splits dark from bright at Otsu's threshold, sets the myocardium
    intensity to the dark-class mean, and splits the bright class into blood
    and enhancement by 1D 2-means (centers initialized at the bright-class min
    and max).
    """
    if len(sa_stack) != len(epi_contours_uv) or not sa_stack:
        raise ValidationError("need one epicardial contour per SA slice")
    pools = []
    for plane, contour in zip(sa_stack, epi_contours_uv):
        mask = polygon_mask(contour, (plane.height, plane.width))
        pools.append(plane.pixels[mask])
    pool = np.concatenate(pools).astype(float)
    if pool.size < min_pool:
        raise ValidationError(f"epicardial interiors enclose {pool.size} px < {min_pool}")
    lo, hi = float(pool.min()), float(pool.max())
    if hi == lo:
        return IntensityModel(myo=lo, blood=lo, enhan=lo, thres=lo)
    counts, edges = np.histogram(pool, bins=256, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    thres = otsu_threshold(counts, centers)
    myo = float(pool[pool < thres].mean())
    upper = pool[pool >= thres]
    if np.unique(upper).size < 2:
        v = float(upper.mean())
        return IntensityModel(myo=myo, blood=v, enhan=v, thres=thres)
    c_lo, c_hi = float(upper.min()), float(upper.max())
    for _ in range(50):
        mid = 0.5 * (c_lo + c_hi)
        low_cluster = upper < mid        # ties go to the upper center
        if not low_cluster.any() or low_cluster.all():
            break
        new_lo = float(upper[low_cluster].mean())
        new_hi = float(upper[~low_cluster].mean())
        if new_lo == c_lo and new_hi == c_hi:
            break
        c_lo, c_hi = new_lo, new_hi
    return IntensityModel(myo=myo, blood=min(c_lo, c_hi), enhan=max(c_lo, c_hi), thres=thres)


def polar_from_contours(endo_uv, epi_uv, n_theta=DEFAULT_N_THETA):
    """Radial reparameterization of an endo/epi contour pair.

    The centre is the mean of all endo and epi points together; both contours
    are resampled at n_theta evenly spaced angles about it.
    """
    from .geometry import star_polygon_radii

    endo_uv = np.asarray(endo_uv, dtype=float)
    epi_uv = np.asarray(epi_uv, dtype=float)
    center = np.vstack([endo_uv, epi_uv]).mean(axis=0)
    angles = np.arange(n_theta) * (2.0 * np.pi / n_theta)
    r_endo = star_polygon_radii(endo_uv, center, angles)
    r_epi = star_polygon_radii(epi_uv, center, angles)
    wall = r_epi - r_endo
    if np.any(wall <= 0):
        raise ValidationError("epicardial contour must enclose the endocardial contour on every ray")
    return PolarContour(center=center, angles=angles, endo_radius=r_endo, wall=wall)


# ---------------------------------------------------------------------------
# Per-ray cost tables


def _leading_valid(samples):
    """Number of leading finite samples per row."""
    finite = np.isfinite(samples)
    has_bad = ~finite.all(axis=1)
    first_bad = np.argmax(~finite, axis=1)
    return np.where(has_bad, first_bad, samples.shape[1]).astype(int)


_PAIR_CACHE = {}


def _sd_pairs(t):
    """Admissible (s, d) pairs for wall thickness t, lexicographically ordered,
    with precomputed template-interval offsets (relative to w).

    Returns (s, d, p1, dd, gam): p1 = 1 when a transition pixel sits at offset
    0 (blood followed by dark tissue); dd = end offset of the pre-enhancement
    dark stretch; gam = 1 when a transition pixel follows the enhancement.
    """
    if t in _PAIR_CACHE:
        return _PAIR_CACHE[t]
    s_list, d_list = [0], [0]
    for s in range(1, t + 1):
        for d in range(0, t - s + 1):
            s_list.append(s)
            d_list.append(d)
    s = np.array(s_list, dtype=int)
    d = np.array(d_list, dtype=int)
    p1 = ((s == 0) | (d >= 1)).astype(int)
    dd = np.where(s == 0, t, d)
    gam = ((t - dd - s) > 0).astype(int)
    _PAIR_CACHE[t] = (s, d, p1, dd, gam)
    return _PAIR_CACHE[t]


def ray_cost_tables(samples, w_init, t_init, half_band, model):
    """Per-ray matching cost over the (w, t) band, minimized over (s, d).

    For each ray i and band offsets (a, b) mapping to w = w_init[i] + a - h,
    t = t_init[i] + b - h, the cost is the template sum of squared errors over
    the first w + t samples plus the residual of the remaining valid samples
    about their own mean, divided by the ray's valid sample count. Candidates
    with w < 1, t < 1, or w + t beyond the valid samples are +inf.

    Returns (cost, sd, valid_len): cost (n, K, K) float, sd (n, K, K, 2) int
    holding the lexicographically smallest minimizing (s, d) per cell.
    """
    samples = np.asarray(samples, dtype=float)
    n, n_max = samples.shape
    w_init = np.asarray(w_init, dtype=int)
    t_init = np.asarray(t_init, dtype=int)
    h = int(half_band)
    k = 2 * h + 1
    valid_len = _leading_valid(samples)
    cost = np.full((n, k, k), np.inf)
    sd = np.zeros((n, k, k, 2), dtype=int)
    blood, myo, enh, thr = model.blood, model.myo, model.enhan, model.thres

    for i in range(n):
        length = int(valid_len[i])
        if length < 2:
            continue
        x = samples[i, :length]
        cum1 = np.concatenate(([0.0], np.cumsum(x)))
        cum2 = np.concatenate(([0.0], np.cumsum(x * x)))

        def seg(a, b, v):
            return (cum2[b] - cum2[a]) - 2.0 * v * (cum1[b] - cum1[a]) + v * v * (b - a)

        for b_off in range(k):
            t = t_init[i] + b_off - h
            if t < 1:
                continue
            s_arr, d_arr, p1, dd, gam = _sd_pairs(t)
            for a_off in range(k):
                w = w_init[i] + a_off - h
                if w < 1 or w + t > length:
                    continue
                sse = seg(0, w, blood)
                sse = sse + seg(w, w + p1, thr)
                sse = sse + seg(w + p1, w + dd, myo)
                sse = sse + seg(w + dd, w + dd + s_arr, enh)
                sse = sse + seg(w + dd + s_arr, w + dd + s_arr + gam, thr)
                sse = sse + seg(w + dd + s_arr + gam, w + t, myo)
                j = int(np.argmin(sse))
                tail = length - (w + t)
                tail_rss = 0.0
                if tail >= 1:
                    ssum = cum1[length] - cum1[w + t]
                    tail_rss = max(0.0, (cum2[length] - cum2[w + t]) - ssum * ssum / tail)
                cost[i, a_off, b_off] = (float(sse[j]) + tail_rss) / length
                sd[i, a_off, b_off] = (s_arr[j], d_arr[j])
    return cost, sd, valid_len


# ---------------------------------------------------------------------------
# Chain energy and ICM


def chain_first_sq(values, cyclic):
    v = np.asarray(values, dtype=float)
    d = v - np.roll(v, 1) if cyclic else np.diff(v)
    return float(np.sum(d * d))


def chain_second_sq(values, cyclic):
    v = np.asarray(values, dtype=float)
    if cyclic:
        d = np.roll(v, -1) - 2.0 * v + np.roll(v, 1)
    else:
        if v.shape[0] < 3:
            return 0.0
        d = v[2:] - 2.0 * v[1:-1] + v[:-2]
    return float(np.sum(d * d))


def chain_smoothness(w, t, cyclic, term_weights=SA_TERM_WEIGHTS):
    fw, sw, ft, st = term_weights
    return (fw * chain_first_sq(w, cyclic) + sw * chain_second_sq(w, cyclic)
            + ft * chain_first_sq(t, cyclic) + st * chain_second_sq(t, cyclic))


@dataclass
class IcmResult:
    w: np.ndarray
    t: np.ndarray
    offsets: np.ndarray        # (n, 2) band offsets
    energy_history: list
    sweeps: int
    converged: bool
    locked: np.ndarray         # (n,) bool


def _site_smooth_terms(values, cand, i, n, cyclic, first_weight, second_weight):
    """Smoothness terms containing site i, evaluated for a vector of candidate
    values at i with all other sites fixed."""
    e = np.zeros_like(cand, dtype=float)

    def at(j):
        return values[j % n] if cyclic else values[j]

    def has(j):
        return True if cyclic else 0 <= j < n

    if first_weight:
        if has(i - 1):
            d = cand - at(i - 1)
            e += first_weight * d * d
        if has(i + 1):
            d = at(i + 1) - cand
            e += first_weight * d * d
    if second_weight:
        if has(i - 1) and has(i + 1):
            d = at(i + 1) - 2.0 * cand + at(i - 1)
            e += second_weight * d * d
        if has(i - 2):
            d = cand - 2.0 * at(i - 1) + at(i - 2)
            e += second_weight * d * d
        if has(i + 2):
            d = at(i + 2) - 2.0 * at(i + 1) + cand
            e += second_weight * d * d
    return e


def icm_minimize(cost, w_init, t_init, *, lam=DEFAULT_LAMBDA, cyclic=True,
                 term_weights=SA_TERM_WEIGHTS, max_sweeps=50, locked=None):
    """Iterated conditional modes over a chain of per-ray (w, t) labels.

    cost is the (n, K, K) band cost table (+inf marks inadmissible labels).
    Sites are visited in order; each is replaced by its band-constrained local
    minimizer given its neighbors, ties resolving to the smallest w then t.
    Sites whose table is all-inf (or flagged in `locked`) stay at their
    initialization and contribute no matching cost. Total energy is recorded
    after every sweep and must never increase.
    """
    cost = np.asarray(cost, dtype=float)
    n, k, k2 = cost.shape
    if k != k2 or k % 2 != 1:
        raise ValidationError(f"cost table must be (n, K, K) with odd K, got {cost.shape}")
    h = k // 2
    w_init = np.asarray(w_init, dtype=int)
    t_init = np.asarray(t_init, dtype=int)
    fw, sw, ft, st = term_weights

    site_dead = ~np.isfinite(cost).any(axis=(1, 2))
    locked_mask = site_dead.copy()
    if locked is not None:
        locked_mask |= np.asarray(locked, dtype=bool)

    offsets = np.full((n, 2), h, dtype=int)
    for i in range(n):
        if locked_mask[i]:
            continue
        if not np.isfinite(cost[i, h, h]):
            flat = int(np.argmin(cost[i]))
            offsets[i] = divmod(flat, k)
    w_cur = np.where(locked_mask, w_init, w_init + offsets[:, 0] - h).astype(float)
    t_cur = np.where(locked_mask, t_init, t_init + offsets[:, 1] - h).astype(float)

    def total_energy():
        match = 0.0
        for i in range(n):
            if not locked_mask[i]:
                match += cost[i, offsets[i, 0], offsets[i, 1]]
        return match + lam * chain_smoothness(w_cur, t_cur, cyclic, term_weights)

    energy_history = [total_energy()]
    sweeps = 0
    converged = False
    cand_off = np.arange(k)
    for _ in range(max_sweeps):
        changed = 0
        for i in range(n):
            if locked_mask[i]:
                continue
            cand_w = (w_init[i] + cand_off - h).astype(float)
            cand_t = (t_init[i] + cand_off - h).astype(float)
            e_w = _site_smooth_terms(w_cur, cand_w, i, n, cyclic, fw, sw)
            e_t = _site_smooth_terms(t_cur, cand_t, i, n, cyclic, ft, st)
            local = cost[i] + lam * (e_w[:, None] + e_t[None, :])
            flat = int(np.argmin(local))
            a, b = divmod(flat, k)
            if (a, b) != (offsets[i, 0], offsets[i, 1]):
                offsets[i] = (a, b)
                w_cur[i] = cand_w[a]
                t_cur[i] = cand_t[b]
                changed += 1
        sweeps += 1
        energy = total_energy()
        if energy > energy_history[-1] + 1e-9 * max(1.0, abs(energy_history[-1])):
            raise NumericFailure(
                f"chain energy increased during ICM sweep {sweeps}: "
                f"{energy_history[-1]!r} -> {energy!r}"
            )
        energy_history.append(energy)
        if changed == 0:
            converged = True
            break
    return IcmResult(
        w=w_cur.astype(int), t=t_cur.astype(int), offsets=offsets,
        energy_history=energy_history, sweeps=sweeps, converged=converged,
        locked=locked_mask,
    )


# ---------------------------------------------------------------------------
# Edge strengths and weights


def edge_strength(profile, j):
    """Raw edge strength at index j of a 1D profile: sum of first-order and
    (half-weighted) second-order absolute differences. NaN when a neighbor is
    missing or invalid."""
    profile = np.asarray(profile, dtype=float)
    if j - 1 < 0 or j + 1 >= profile.shape[0]:
        return float("nan")
    a, b, c = profile[j - 1], profile[j], profile[j + 1]
    if not (np.isfinite(a) and np.isfinite(b) and np.isfinite(c)):
        return float("nan")
    return float(abs(b - a) + abs(b - c) + 0.5 * abs(c - a))


def normalize_strengths(strengths):
    """Min-max normalize raw strengths of one edge-point set to [0, 1].

    Invalid (NaN) strengths map to weight 0; a flat set maps to all ones.
    """
    s = np.asarray(strengths, dtype=float)
    out = np.zeros_like(s)
    ok = np.isfinite(s)
    if not ok.any():
        return out
    lo = s[ok].min()
    hi = s[ok].max()
    if hi == lo:
        out[ok] = 1.0
    else:
        out[ok] = (s[ok] - lo) / (hi - lo)
    return out


def edge_weights(profiles, indices):
    """Normalized edge weights for one set of points given their sampling
    profiles and per-point edge indices."""
    raw = np.array([edge_strength(p, j) for p, j in zip(profiles, indices)])
    return normalize_strengths(raw)


def normalize_edge_weights(points):
    """Fill EdgePoint.weight in place, normalizing per declared set.

    Sets: all SA endo points of the stack together, all SA epi points
    together, and each LA image separately per kind.
    """
    groups = {}
    for p in points:
        groups.setdefault((p.source, p.kind), []).append(p)
    for group in groups.values():
        weights = normalize_strengths([p.strength for p in group])
        for p, w in zip(group, weights):
            p.weight = float(w)
    return points


# ---------------------------------------------------------------------------
# Detection drivers


@dataclass
class SaDetection:
    contour: PolarContour          # refined (w, t) about the coarse centre
    params: np.ndarray             # (n, 4) int: w, t, s, d per ray
    points: list
    samples: np.ndarray            # (n, N) ray profiles
    energy_history: list
    sweeps: int
    converged: bool
    locked: np.ndarray


@dataclass
class LaDetection:
    sides: dict                    # side -> AxialContour
    points: list
    samples: dict                  # side -> (n, N) profiles
    params: dict                   # side -> (n, 4) int
    energy_history: dict           # side -> list
    locked: dict                   # side -> (n,) bool


def _sample_rays(pixels, origins_uv, dirs_uv, lengths):
    n = origins_uv.shape[0]
    n_max = int(np.max(lengths))
    steps = np.arange(n_max)
    uu = origins_uv[:, 0:1] + steps[None, :] * dirs_uv[:, 0:1]
    vv = origins_uv[:, 1:2] + steps[None, :] * dirs_uv[:, 1:2]
    samples = bilinear_sample(pixels, uu, vv)
    samples[steps[None, :] >= np.asarray(lengths)[:, None]] = np.nan
    return samples


def detect_edges_sa(lge, coarse, model, *, band=SA_BAND, lam=DEFAULT_LAMBDA,
                    max_sweeps=50, slice_index=-1):
    """Refine a coarse polar contour on one SA slice.

    Casts one ray per coarse angle from the contour centre, samples the image
    out to w0 + t0 + band pixels, fits (w, t, s, d) per ray within the ±band/2
    window, and couples rays with the cyclic smoothness energy via ICM. Rays
    leaving the image keep their initialization with zero-weight edge points.
    """
    if band < 3 or band % 2 != 1:
        raise ValidationError(f"band must be an odd width >= 3, got {band}")
    h = band // 2
    n = coarse.n_theta
    w0 = np.maximum(1, np.rint(coarse.endo_radius).astype(int))
    t0 = np.maximum(1, np.rint(coarse.wall).astype(int))
    dirs = coarse.ray_dirs()
    origins = np.repeat(coarse.center[None, :], n, axis=0)
    samples = _sample_rays(lge.pixels, origins, dirs, w0 + t0 + band)

    cost, sd, _ = ray_cost_tables(samples, w0, t0, h, model)
    res = icm_minimize(cost, w0, t0, lam=lam, cyclic=True,
                       term_weights=SA_TERM_WEIGHTS, max_sweeps=max_sweeps)
    s_fin = np.zeros(n, dtype=int)
    d_fin = np.zeros(n, dtype=int)
    live = ~res.locked
    s_fin[live] = sd[live, res.offsets[live, 0], res.offsets[live, 1], 0]
    d_fin[live] = sd[live, res.offsets[live, 0], res.offsets[live, 1], 1]
    params = np.stack([res.w, res.t, s_fin, d_fin], axis=1)

    contour = PolarContour(center=coarse.center.copy(), angles=coarse.angles.copy(),
                           endo_radius=res.w.astype(float), wall=res.t.astype(float))
    points = []
    for i in range(n):
        for kind, j in (("endo", int(res.w[i])), ("epi", int(res.w[i] + res.t[i]))):
            uv = coarse.center + j * dirs[i]
            strength = float("nan") if res.locked[i] else edge_strength(samples[i], j)
            points.append(EdgePoint(
                position=lge.image_to_world(uv[0], uv[1]), kind=kind, source="SA",
                strength=strength, slice_index=slice_index, ray=i,
            ))
    return SaDetection(contour=contour, params=params, points=points,
                       samples=samples, energy_history=res.energy_history,
                       sweeps=res.sweeps, converged=res.converged, locked=res.locked)


def _polygon_plane_crossings(poly_world, plane, tol=1e-9):
    """Points where a closed 3D polygon crosses a plane."""
    pts = np.asarray(poly_world, dtype=float)
    normal = plane.normal
    f = (pts - plane.origin) @ normal
    out = []
    m = pts.shape[0]
    for i in range(m):
        j = (i + 1) % m
        fi, fj = f[i], f[j]
        if abs(fi) <= tol:
            out.append(pts[i])
        elif (fi < -tol and fj > tol) or (fi > tol and fj < -tol):
            alpha = fi / (fi - fj)
            out.append(pts[i] + alpha * (pts[j] - pts[i]))
    dedup = []
    for p in out:
        if not any(np.linalg.norm(p - q) < 1e-6 for q in dedup):
            dedup.append(p)
    return dedup


def detect_edges_la(lge_la, endo_contours_world, epi_contours_world, model, *,
                    band=LA_BAND, lam=DEFAULT_LAMBDA, n_interp=4, max_sweeps=50,
                    source="LA4C"):
    """Detect myocardial edges in one LA image.

    The rigid 3D SA contours are intersected with the LA plane; each usable
    slice yields two endo and two epi crossings whose mean is a central-axis
    point. Slice locations are densified by factor n_interp, rays are cast
    within the LA plane perpendicular to the local axis direction, and each
    side of the axis is optimized as an independent open chain. Returns None
    (with a warning) when fewer than 3 slices intersect the plane usably.
    """
    if band < 3 or band % 2 != 1:
        raise ValidationError(f"band must be an odd width >= 3, got {band}")
    if n_interp < 1:
        raise ValidationError(f"n_interp must be >= 1, got {n_interp}")
    h = band // 2

    axis_pts, endo_uv, epi_uv = [], [], []
    for endo_poly, epi_poly in zip(endo_contours_world, epi_contours_world):
        e_cross = _polygon_plane_crossings(endo_poly, lge_la)
        p_cross = _polygon_plane_crossings(epi_poly, lge_la)
        if len(e_cross) != 2 or len(p_cross) != 2:
            continue
        e2 = np.array([lge_la.world_to_image(p) for p in e_cross])
        p2 = np.array([lge_la.world_to_image(p) for p in p_cross])
        axis = np.vstack([e2, p2]).mean(axis=0)
        e_left, e_right = (e2[0], e2[1]) if e2[0, 0] <= e2[1, 0] else (e2[1], e2[0])
        p_left, p_right = (p2[0], p2[1]) if p2[0, 0] <= p2[1, 0] else (p2[1], p2[0])
        if not (p_left[0] < e_left[0] < axis[0] < e_right[0] < p_right[0]):
            continue
        axis_pts.append(axis)
        endo_uv.append((e_left, e_right))
        epi_uv.append((p_left, p_right))
    n_usable = len(axis_pts)
    if n_usable < 3:
        logger.warning("LA detection skipped for %s: only %d usable SA intersections (need >= 3)",
                       source, n_usable)
        return None

    axis_pts = np.asarray(axis_pts, dtype=float)
    # Densified location parameter: fractional slice index, base to apex.
    fracs = np.arange(n_interp) / n_interp
    l_vals = np.concatenate([(k + fracs) for k in range(n_usable - 1)] + [[float(n_usable - 1)]])
    k_idx = np.minimum(np.floor(l_vals).astype(int), n_usable - 2)
    alpha = l_vals - k_idx
    axis_l = axis_pts[k_idx] + alpha[:, None] * (axis_pts[k_idx + 1] - axis_pts[k_idx])

    seg_tan = axis_pts[1:] - axis_pts[:-1]
    seg_tan /= np.maximum(np.linalg.norm(seg_tan, axis=1, keepdims=True), 1e-12)
    node_tan = np.vstack([seg_tan[0], seg_tan[:-1] + seg_tan[1:], seg_tan[-1]])
    node_tan /= np.maximum(np.linalg.norm(node_tan, axis=1, keepdims=True), 1e-12)
    on_node = alpha < 1e-12
    tan_l = np.where(on_node[:, None], node_tan[k_idx], seg_tan[k_idx])
    tan_l[-1] = node_tan[-1]
    # In-plane perpendicular pointing toward increasing u.
    perp = np.stack([tan_l[:, 1], -tan_l[:, 0]], axis=1)
    flip = perp[:, 0] < 0
    perp[flip] *= -1.0
    perp /= np.maximum(np.linalg.norm(perp, axis=1, keepdims=True), 1e-12)

    sides = {}
    all_points = []
    samples_by, params_by, hist_by, locked_by = {}, {}, {}, {}
    for side, sign in (("left", -1.0), ("right", 1.0)):
        col = 0 if sign < 0 else 1
        # Half-widths at the slice nodes, interpolated to the densified l grid.
        w_nodes = np.array([np.linalg.norm(endo_uv[k][col] - axis_pts[k]) for k in range(n_usable)])
        t_nodes = np.array([np.linalg.norm(epi_uv[k][col] - endo_uv[k][col]) for k in range(n_usable)])
        w0 = np.maximum(1, np.rint(w_nodes[k_idx] + alpha * (w_nodes[k_idx + 1] - w_nodes[k_idx])).astype(int))
        t0 = np.maximum(1, np.rint(t_nodes[k_idx] + alpha * (t_nodes[k_idx + 1] - t_nodes[k_idx])).astype(int))
        dirs = sign * perp
        samples = _sample_rays(lge_la.pixels, axis_l, dirs, w0 + t0 + band)
        cost, sd, _ = ray_cost_tables(samples, w0, t0, h, model)
        res = icm_minimize(cost, w0, t0, lam=lam, cyclic=False,
                           term_weights=LA_TERM_WEIGHTS, max_sweeps=max_sweeps)
        live = ~res.locked
        s_fin = np.zeros(len(l_vals), dtype=int)
        d_fin = np.zeros(len(l_vals), dtype=int)
        s_fin[live] = sd[live, res.offsets[live, 0], res.offsets[live, 1], 0]
        d_fin[live] = sd[live, res.offsets[live, 0], res.offsets[live, 1], 1]
        contour = AxialContour(side=side, l=l_vals.copy(), axis_uv=axis_l.copy(),
                               ray_dir_uv=dirs.copy(), blood=res.w.astype(float),
                               wall=res.t.astype(float))
        for i in range(len(l_vals)):
            for kind, j in (("endo", int(res.w[i])), ("epi", int(res.w[i] + res.t[i]))):
                uv = axis_l[i] + j * dirs[i]
                strength = float("nan") if res.locked[i] else edge_strength(samples[i], j)
                all_points.append(EdgePoint(
                    position=lge_la.image_to_world(uv[0], uv[1]), kind=kind,
                    source=source, strength=strength, ray=i,
                ))
        sides[side] = contour
        samples_by[side] = samples
        params_by[side] = np.stack([res.w, res.t, s_fin, d_fin], axis=1)
        hist_by[side] = res.energy_history
        locked_by[side] = res.locked
    return LaDetection(sides=sides, points=all_points, samples=samples_by,
                       params=params_by, energy_history=hist_by, locked=locked_by)
