"""Command-line interface.

Subcommands::

    lvseg phantom OUT [--spec FILE] [--seed N] [--max-shift PX]
    lvseg run BUNDLE --out DIR [--config FILE] [flag overrides] [--skip-align]
    lvseg eval DIR_A DIR_B [--pixel-spacing MM] [--out FILE]
    lvseg align BUNDLE --out DIR          (misalignment correction only)
    lvseg register BUNDLE --out DIR       (cine-to-LGE registration only)
    lvseg detect BUNDLE --out DIR         (through edge detection + weights)
    lvseg deform BUNDLE --out DIR         (full fit, mesh-centric outputs)

Exit codes: 0 success, 2 invalid inputs or configuration, 3 stage failure.
"""

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bundle import read_bundle, write_bundle, write_contour_csv, write_plane
from .config import PipelineConfig
from .errors import (DegenerateHistogramError, DegenerateSampleError,
                     NumericFailure, RegistrationFailure, StageError,
                     ValidationError)
from .mesh import export_obj
from .metrics import study_metrics
from .phantom import InfarctSpec, PhantomSpec, TissueIntensities, generate, inject_misalignment
from .pipeline import run_pipeline

logger = logging.getLogger(__name__)

# CLI flag -> PipelineConfig field, applied over the config file.
_FLAG_FIELDS = ("align_radius", "align_passes", "pi_r", "pi_delta",
                "search_radius", "smooth_lambda", "band_sa", "band_la",
                "n_theta", "n_interp", "threads")

ENDO_COLOR = (255, 80, 80)
EPI_COLOR = (80, 180, 255)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _json_write(path, data):
    with open(path, "w", encoding="ascii") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _load_bundle(path):
    """Read a bundle, reporting problems as a load-stage failure."""
    try:
        return read_bundle(path)
    except StageError:
        raise
    except Exception as exc:
        raise StageError("load", str(exc)) from exc


def _config_from_args(args):
    if getattr(args, "config", None):
        config = PipelineConfig.from_json(args.config)
    else:
        config = PipelineConfig()
    for name in _FLAG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    return config.validate()


def _add_pipeline_flags(parser, with_skip=True):
    parser.add_argument("--config", help="pipeline config JSON file")
    parser.add_argument("--align-radius", type=int, dest="align_radius",
                        help="misalignment search radius, px")
    parser.add_argument("--align-passes", type=int, dest="align_passes",
                        help="max SA alignment passes")
    parser.add_argument("--pi-r", type=int, dest="pi_r",
                        help="pattern intensity disc radius, px")
    parser.add_argument("--pi-delta", type=float, dest="pi_delta",
                        help="pattern intensity contrast constant")
    parser.add_argument("--search-radius", type=int, dest="search_radius",
                        help="registration search radius, px")
    parser.add_argument("--lambda", type=float, dest="smooth_lambda",
                        help="detection smoothness weight")
    parser.add_argument("--band-sa", type=int, dest="band_sa",
                        help="SA detection band width, px (odd)")
    parser.add_argument("--band-la", type=int, dest="band_la",
                        help="LA detection band width, px (odd)")
    parser.add_argument("--n-theta", type=int, dest="n_theta",
                        help="SA rays per slice")
    parser.add_argument("--n-interp", type=int, dest="n_interp",
                        help="LA densification factor")
    parser.add_argument("--threads", type=int, dest="threads",
                        help="thread-count hint; results do not depend on it")
    if with_skip:
        parser.add_argument("--skip-align", action="store_true",
                            help="trust the stored slice poses")


def _dataclass_from_dict(cls, data, where):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValidationError(f"unknown {where} fields: {sorted(unknown)}")
    return cls(**data)


def _load_phantom_spec(path, seed):
    data = {}
    if path:
        try:
            with open(path, "r", encoding="ascii") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read phantom spec {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ValidationError("phantom spec file must hold a JSON object")
    infarct = _dataclass_from_dict(InfarctSpec, data.pop("infarct", {}), "infarct")
    intensities = _dataclass_from_dict(TissueIntensities,
                                       data.pop("intensities", {}), "intensities")
    spec = _dataclass_from_dict(PhantomSpec, data, "phantom spec")
    spec.infarct = infarct
    spec.intensities = intensities
    if seed is not None:
        spec.seed = int(seed)
    return spec.validate()


def _write_contour_dir(directory, endo_uv, epi_uv):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for k, (endo, epi) in enumerate(zip(endo_uv, epi_uv)):
        write_contour_csv(directory / f"endo_{k:04d}.csv", endo)
        write_contour_csv(directory / f"epi_{k:04d}.csv", epi)


def _write_overlays(directory, planes, endo_uv, epi_uv):
    from PIL import Image, ImageDraw

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for k, plane in enumerate(planes):
        px = plane.pixels
        lo, hi = float(px.min()), float(px.max())
        gray = np.zeros_like(px) if hi == lo else (px - lo) / (hi - lo)
        rgb = np.repeat((gray * 255).astype(np.uint8)[:, :, None], 3, axis=2)
        image = Image.fromarray(rgb)
        draw = ImageDraw.Draw(image)
        for contour, color in ((endo_uv[k], ENDO_COLOR), (epi_uv[k], EPI_COLOR)):
            pts = np.asarray(contour, dtype=float)
            if pts.shape[0] >= 2:
                xy = [tuple(p) for p in pts] + [tuple(pts[0])]
                draw.line(xy, fill=color, width=1)
        image.save(directory / f"{k:04d}.png")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_phantom(args):
    spec = _load_phantom_spec(args.spec, args.seed)
    study = generate(spec)
    if args.max_shift > 0:
        moved, shifts = inject_misalignment(study.lge_sa, args.max_shift, spec.seed)
        study.lge_sa = moved
        logger.info("injected SA misalignment (max %d px): %s",
                    args.max_shift, shifts.tolist())
    out = write_bundle(study, args.out)
    print(f"wrote phantom bundle with {spec.n_sa_slices} SA slices to {out}")
    return 0


def cmd_run(args):
    config = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bundle = _load_bundle(args.bundle)
    result = run_pipeline(bundle, config, skip_align=args.skip_align)

    _write_contour_dir(out / "contours", result.endo_uv, result.epi_uv)
    export_obj(out / "meshes.obj",
               {"endo": result.endo_mesh, "epi": result.epi_mesh})
    _write_overlays(out / "overlays", result.sa, result.endo_uv, result.epi_uv)
    if result.metrics is not None:
        _json_write(out / "metrics.json", result.metrics)
    _json_write(out / "run_log.json", result.log)

    if result.metrics is not None:
        print(f"myocardium Dice {result.metrics['dice_myo']:.4f}, "
              f"blood-pool Dice {result.metrics['dice_bp']:.4f}, "
              f"contour distance {result.metrics['mcd_endo_mm']:.3f} mm endo / "
              f"{result.metrics['mcd_epi_mm']:.3f} mm epi")
    print(f"wrote contours, meshes.obj, overlays and run_log.json to {out}")
    return 0


def _read_contour_dir(directory):
    from .bundle import read_contour_csv

    directory = Path(directory)
    if not directory.is_dir():
        raise ValidationError(f"contour directory {directory} does not exist")
    stacks = {}
    for kind in ("endo", "epi"):
        found = {}
        for path in sorted(directory.glob(f"{kind}_*.csv")):
            try:
                index = int(path.stem.split("_")[-1])
            except ValueError:
                continue
            found[index] = read_contour_csv(path)[1]
        stacks[kind] = found
    if not stacks["endo"] or not stacks["epi"]:
        raise ValidationError(f"no endo/epi contour CSVs in {directory}")
    if sorted(stacks["endo"]) != sorted(stacks["epi"]):
        raise ValidationError(f"endo/epi slice indices differ in {directory}")
    return stacks


def cmd_eval(args):
    a = _read_contour_dir(args.dir_a)
    b = _read_contour_dir(args.dir_b)
    if sorted(a["endo"]) != sorted(b["endo"]):
        raise ValidationError(
            f"slice index mismatch: {sorted(a['endo'])} vs {sorted(b['endo'])}")
    indices = sorted(a["endo"])
    report = study_metrics([a["endo"][k] for k in indices],
                           [a["epi"][k] for k in indices],
                           [b["endo"][k] for k in indices],
                           [b["epi"][k] for k in indices],
                           shape=None, pixel_spacing=args.pixel_spacing)
    text = json.dumps(report, indent=2, sort_keys=True, default=_json_default)
    print(text)
    if args.out:
        _json_write(args.out, report)
    return 0


def cmd_align(args):
    config = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bundle = _load_bundle(args.bundle)
    result = run_pipeline(bundle, config, stop_after="align")
    poses = out / "sa_aligned"
    poses.mkdir(exist_ok=True)
    for k, plane in enumerate(result.sa):
        write_plane(poses / f"{k:04d}", plane)
    _json_write(out / "align.json", result.log["alignment"])
    shifts = result.log["alignment"]["sa_shifts"]
    print(f"aligned {len(result.sa)} SA slices, shifts {shifts}; "
          f"outputs in {out}")
    return 0


def cmd_register(args):
    config = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bundle = _load_bundle(args.bundle)
    # Registration compares pixel content only, so the stored poses are fine.
    result = run_pipeline(bundle, config, skip_align=True, stop_after="register")
    _write_contour_dir(out / "contours_rigid", result.rigid_endo_uv,
                       result.rigid_epi_uv)
    _json_write(out / "register.json", result.log["registration"])
    print(f"registered {bundle.n_slices} slices, shifts "
          f"{result.registration_shifts.tolist()}; outputs in {out}")
    return 0


def cmd_detect(args):
    config = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bundle = _load_bundle(args.bundle)
    result = run_pipeline(bundle, config, skip_align=args.skip_align,
                          stop_after="detect")
    lines = ["x,y,z,kind,source,slice,ray,strength,weight"]
    for p in result.edge_points:
        lines.append(f"{p.position[0]:.6f},{p.position[1]:.6f},{p.position[2]:.6f},"
                     f"{p.kind},{p.source},{p.slice_index},{p.ray},"
                     f"{p.strength:.6f},{p.weight:.6f}")
    with open(out / "edge_points.csv", "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    refined_endo = [d.contour.endo_points_uv() for d in result.sa_detections]
    refined_epi = [d.contour.epi_points_uv() for d in result.sa_detections]
    _write_contour_dir(out / "contours_sa", refined_endo, refined_epi)
    _json_write(out / "detect.json", {
        "intensity_model": result.log["intensity_model"],
        "detect_sa": result.log["detect_sa"],
        "detect_la": result.log["detect_la"],
    })
    print(f"detected {len(result.edge_points)} edge points; outputs in {out}")
    return 0


def cmd_deform(args):
    config = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bundle = _load_bundle(args.bundle)
    result = run_pipeline(bundle, config, skip_align=args.skip_align)
    export_obj(out / "meshes.obj",
               {"endo": result.endo_mesh, "epi": result.epi_mesh})
    _write_contour_dir(out / "contours", result.endo_uv, result.epi_uv)
    _json_write(out / "deform.json", result.log["deform"])
    summary = result.deform_log[-1]
    print(f"deformation {'converged' if summary['converged'] else 'stopped'} "
          f"after {summary['iterations']} iterations; outputs in {out}")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lvseg",
        description="LV segmentation for late-gadolinium-enhanced cardiac MR")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic study bundle")
    p.add_argument("out", help="bundle output directory")
    p.add_argument("--spec", help="phantom spec JSON file")
    p.add_argument("--seed", type=int, help="override the spec seed")
    p.add_argument("--max-shift", type=int, default=0,
                   help="inject per-slice SA misalignment up to this many px")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("run", help="run the full segmentation pipeline")
    p.add_argument("bundle", help="study bundle directory")
    p.add_argument("--out", required=True, help="results directory")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="compare two contour directories")
    p.add_argument("dir_a", help="first contour directory (e.g. predictions)")
    p.add_argument("dir_b", help="second contour directory (e.g. truth)")
    p.add_argument("--pixel-spacing", type=float, default=1.0,
                   help="mm per px for distance reporting (default 1.0)")
    p.add_argument("--out", help="also write the report to this JSON file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("align", help="misalignment correction only")
    p.add_argument("bundle")
    p.add_argument("--out", required=True)
    _add_pipeline_flags(p, with_skip=False)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("register", help="cine-to-LGE registration only")
    p.add_argument("bundle")
    p.add_argument("--out", required=True)
    _add_pipeline_flags(p, with_skip=False)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("detect", help="run through edge detection")
    p.add_argument("bundle")
    p.add_argument("--out", required=True)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("deform", help="full fit with mesh-centric outputs")
    p.add_argument("bundle")
    p.add_argument("--out", required=True)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_deform)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return int(args.func(args) or 0)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DegenerateHistogramError, DegenerateSampleError, NumericFailure,
            RegistrationFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
