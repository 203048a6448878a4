"""End-to-end LV segmentation pipeline.

Stages, each wrapped so a failure surfaces as a StageError naming the stage:

1. align        correct SA breath-hold misalignment against the LA images
2. register     per-slice cine-to-LGE translation, propagate a-priori contours
3. intensities  estimate the four-level intensity model from the LGE SA stack
4. detect_sa    per-slice polar edge detection (one coupled ICM chain each)
5. detect_la    per-LA-image axial edge detection (skipped below 3 usable
                slices), then cross-image edge-weight normalization
6. mesh         build the paired simplex meshes from the rigid contours
7. deform       iterate smoothness / edge / thickness forces
8. slice        cut the deformed meshes at every SA plane
9. metrics      compare against ground truth when the bundle carries it
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .align import realign
from .config import PipelineConfig
from .errors import StageError, ValidationError
from .geometry import PlaneFrame
from .mesh import DeformParams, build_meshes, deform, slice_mesh
from .metrics import study_metrics
from .profile_model import (detect_edges_la, detect_edges_sa,
                            estimate_intensities, normalize_edge_weights,
                            polar_from_contours)
from .register import (PatternIntensityParams, define_roi,
                       propagate_contours, register_translation)

logger = logging.getLogger(__name__)

# Checkpoints accepted by run_pipeline(stop_after=...); "detect" covers both
# detection stages plus weight normalization.
CHECKPOINTS = ("align", "register", "intensities", "detect", "mesh", "deform")


@dataclass
class RunResult:
    config: PipelineConfig
    sa: list                   # SA planes after misalignment correction
    la4c: object
    la2c: object
    alignment: object = None   # AlignmentResult, or None when skipped
    registration_shifts: object = None   # (n, 2) int, cine -> LGE
    rigid_endo_uv: list = None # propagated a-priori contours, LGE px
    rigid_epi_uv: list = None
    model: object = None       # IntensityModel
    sa_detections: list = field(default_factory=list)
    la_detections: dict = field(default_factory=dict)  # source -> LaDetection|None
    edge_points: list = field(default_factory=list)
    endo_mesh: object = None
    epi_mesh: object = None
    pairing: object = None
    deform_log: list = field(default_factory=list)
    endo_uv: list = None       # final per-slice (K, 2) contours, LGE px
    epi_uv: list = None
    metrics: dict = None       # None when the bundle has no truth
    log: dict = None


def _stage(name, timings, fn):
    start = time.perf_counter()
    try:
        out = fn()
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, str(exc)) from exc
    timings[name] = round(time.perf_counter() - start, 6)
    return out


def _lift(plane, contour_uv):
    uv = np.asarray(contour_uv, dtype=float)
    return plane.image_to_world(uv[:, 0], uv[:, 1])


def run_pipeline(bundle, config=None, *, skip_align=False, stop_after=None):
    """Run the pipeline on a study bundle; returns a RunResult.

    ``stop_after`` truncates the run after the named checkpoint (one of
    CHECKPOINTS); fields of later stages stay at their defaults.
    """
    if config is None:
        config = PipelineConfig()
    config.validate()
    if stop_after is not None and stop_after not in CHECKPOINTS:
        raise ValidationError(f"stop_after must be one of {CHECKPOINTS}, got {stop_after!r}")
    limit = CHECKPOINTS.index(stop_after) if stop_after else len(CHECKPOINTS)

    def want(name):
        return CHECKPOINTS.index(name) <= limit

    n = bundle.n_slices
    timings = {}

    def do_align():
        if skip_align:
            return list(bundle.sa), bundle.la4c, bundle.la2c, None
        sa, la, align_res = realign(bundle.sa, [bundle.la4c, bundle.la2c],
                                    search_radius_px=config.align_radius,
                                    max_passes=config.align_passes)
        return sa, la[0], la[1], align_res

    sa, la4c, la2c, alignment = _stage("align", timings, do_align)
    res = RunResult(config=config, sa=sa, la4c=la4c, la2c=la2c,
                    alignment=alignment)

    if want("register"):
        def do_register():
            pi = PatternIntensityParams(r=config.pi_r, delta=config.pi_delta)
            shifts = np.zeros((n, 2), dtype=int)
            endo, epi = [], []
            for k in range(n):
                roi = define_roi(bundle.apriori_epi[k], bundle.cine[k])
                shift = register_translation(
                    bundle.cine[k], sa[k], roi,
                    search_radius_px=config.search_radius, params=pi)
                shifts[k] = shift
                endo.append(propagate_contours(bundle.apriori_endo[k], shift))
                epi.append(propagate_contours(bundle.apriori_epi[k], shift))
            return shifts, endo, epi

        out = _stage("register", timings, do_register)
        res.registration_shifts, res.rigid_endo_uv, res.rigid_epi_uv = out

    if want("intensities"):
        res.model = _stage("intensities", timings,
                           lambda: estimate_intensities(sa, res.rigid_epi_uv))

    if want("detect"):
        def do_detect_sa():
            detections = []
            for k in range(n):
                coarse = polar_from_contours(res.rigid_endo_uv[k],
                                             res.rigid_epi_uv[k],
                                             n_theta=config.n_theta)
                det = detect_edges_sa(sa[k], coarse, res.model,
                                      band=config.band_sa,
                                      lam=config.smooth_lambda,
                                      max_sweeps=config.icm_max_sweeps,
                                      slice_index=k)
                detections.append(det)
                res.edge_points.extend(det.points)
            return detections

        res.sa_detections = _stage("detect_sa", timings, do_detect_sa)

        endo_world = [_lift(sa[k], res.rigid_endo_uv[k]) for k in range(n)]
        epi_world = [_lift(sa[k], res.rigid_epi_uv[k]) for k in range(n)]

        def do_detect_la():
            out = {}
            for source, image in (("LA4C", la4c), ("LA2C", la2c)):
                det = detect_edges_la(image, endo_world, epi_world, res.model,
                                      band=config.band_la,
                                      lam=config.smooth_lambda,
                                      n_interp=config.n_interp,
                                      max_sweeps=config.icm_max_sweeps,
                                      source=source)
                out[source] = det
                if det is not None:
                    res.edge_points.extend(det.points)
            normalize_edge_weights(res.edge_points)
            return out

        res.la_detections = _stage("detect_la", timings, do_detect_la)

    if want("mesh"):
        def do_mesh():
            frame = PlaneFrame.of(sa[-1])
            return build_meshes(endo_world, epi_world, frame,
                                n_ring_vertices=config.n_ring_vertices,
                                n_interp_rings=config.n_interp_rings)

        endo_mesh0, epi_mesh0, res.pairing = _stage("mesh", timings, do_mesh)
        res.endo_mesh, res.epi_mesh = endo_mesh0, epi_mesh0

    if want("deform"):
        def do_deform():
            params = DeformParams(gamma=config.gamma, alpha=config.alpha,
                                  beta=config.beta, mu=config.mu,
                                  d_cutoff=config.d_cutoff,
                                  max_iters=config.deform_max_iters,
                                  min_move=config.deform_min_move)
            return deform(res.endo_mesh, res.epi_mesh, res.pairing,
                          res.edge_points, params)

        res.endo_mesh, res.epi_mesh, res.deform_log = _stage(
            "deform", timings, do_deform)

    if stop_after is None:
        def do_slice():
            endo = [slice_mesh(res.endo_mesh, sa[k]) for k in range(n)]
            epi = [slice_mesh(res.epi_mesh, sa[k]) for k in range(n)]
            return endo, epi

        res.endo_uv, res.epi_uv = _stage("slice", timings, do_slice)

        if bundle.has_truth:
            shape = (sa[0].height, sa[0].width)
            res.metrics = _stage("metrics", timings, lambda: study_metrics(
                res.endo_uv, res.epi_uv, bundle.truth_endo, bundle.truth_epi,
                shape=shape, pixel_spacing=sa[0].pixel_spacing))

    res.log = _build_log(res, skip_align, timings)
    return res


def _build_log(res, skip_align, timings):
    align_log = None
    if res.alignment is not None:
        align_log = {
            "sa_shifts": res.alignment.sa_shifts.tolist(),
            "la_shifts": res.alignment.la_shifts.tolist(),
            "unalignable": list(map(bool, res.alignment.unalignable)),
            "passes": res.alignment.passes,
            "residual": res.alignment.residual,
            "residual_history": list(map(float, res.alignment.residual_history)),
        }
    model_log = None
    if res.model is not None:
        model_log = {"myo": res.model.myo, "blood": res.model.blood,
                     "enhan": res.model.enhan, "thres": res.model.thres}
    sa_log = [{
        "slice": i,
        "sweeps": det.sweeps,
        "converged": bool(det.converged),
        "locked_rays": int(det.locked.sum()),
        "energy_initial": float(det.energy_history[0]),
        "energy_final": float(det.energy_history[-1]),
    } for i, det in enumerate(res.sa_detections)]
    la_log = {}
    for source, det in res.la_detections.items():
        if det is None:
            la_log[source] = None
            continue
        la_log[source] = {side: {
            "sites": int(det.params[side].shape[0]),
            "locked": int(det.locked[side].sum()),
            "sweeps": len(det.energy_history[side]) - 1,
            "energy_initial": float(det.energy_history[side][0]),
            "energy_final": float(det.energy_history[side][-1]),
        } for side in det.sides}
    summary = res.deform_log[-1] if res.deform_log else {}
    reg_log = None
    if res.registration_shifts is not None:
        reg_log = {"shifts": res.registration_shifts.tolist()}
    return {
        "config": res.config.to_dict(),
        "skip_align": bool(skip_align),
        "timings_s": dict(timings),
        "alignment": align_log,
        "registration": reg_log,
        "intensity_model": model_log,
        "detect_sa": sa_log,
        "detect_la": la_log,
        "n_edge_points": len(res.edge_points),
        "deform": {"iterations": summary.get("iterations"),
                   "converged": summary.get("converged"),
                   "history": res.deform_log[:-1]},
        "metrics": res.metrics,
    }
