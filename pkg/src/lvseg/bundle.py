"""Study bundle IO: 16-bit PGM images with JSON pose sidecars, contour CSVs.

Bundle layout::

    sa/0000.pgm + sa/0000.json     LGE short-axis slices, base to apex
    cine/0000.pgm + cine/0000.json cine slices matching the SA stack
    la4c.pgm + la4c.json           LGE 4-chamber long-axis image
    la2c.pgm + la2c.json           LGE 2-chamber long-axis image
    apriori/endo_0000.csv ...      a-priori contours in cine pixel coords
    truth/endo_0000.csv ...        optional ground truth in LGE pixel coords

Images are binary (P5) PGM, maxval 65535, big-endian, with the slice pose
(origin, row/column directions, pixel spacing, thickness, label) in the
sidecar. Contour CSVs have a `theta_or_index,u,v` header and %.6f fields.
"""

import dataclasses
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .geometry import SlicePlane

_INDEX_RE = re.compile(r"^(\d{4})\.pgm$")


# ---------------------------------------------------------------------------
# PGM + sidecar


def write_pgm(path, pixels):
    """Write a 2D array as 16-bit big-endian binary PGM (values clipped and
    rounded to [0, 65535])."""
    arr = np.asarray(pixels, dtype=float)
    if arr.ndim != 2:
        raise ValidationError(f"PGM image must be 2D, got shape {arr.shape}")
    data = np.clip(np.rint(arr), 0, 65535).astype(">u2")
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        match = re.compile(rb"\s*(?:#[^\n]*\n)*\s*(\S+)").match(raw, pos)
        if match is None:
            raise ValidationError(f"truncated PGM header in {path}")
        fields.append(match.group(1))
        pos = match.end()
    if fields[0] != b"P5":
        raise ValidationError(f"{path} is not binary PGM (magic {fields[0]!r})")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    pos += 1  # single whitespace byte after maxval
    dtype = np.dtype(">u2" if maxval > 255 else "u1")
    count = w * h
    if len(raw) - pos < count * dtype.itemsize:
        raise ValidationError(f"truncated PGM data in {path}")
    pixels = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
    return pixels.reshape(h, w).astype(float)


def write_plane(base_path, plane):
    """Write a SlicePlane as <base>.pgm plus <base>.json."""
    base = Path(base_path)
    write_pgm(base.with_suffix(".pgm"), plane.pixels)
    meta = {
        "origin": list(map(float, plane.origin)),
        "row_dir": list(map(float, plane.row_dir)),
        "col_dir": list(map(float, plane.col_dir)),
        "pixel_spacing": float(plane.pixel_spacing),
        "thickness": float(plane.thickness),
        "label": plane.label,
    }
    with open(base.with_suffix(".json"), "w", encoding="ascii") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_plane(base_path):
    base = Path(base_path)
    pgm = base.with_suffix(".pgm")
    sidecar = base.with_suffix(".json")
    if not sidecar.exists():
        raise ValidationError(f"image {pgm} has no geometry sidecar {sidecar}")
    with open(sidecar, "r", encoding="ascii") as fh:
        meta = json.load(fh)
    return SlicePlane(
        pixels=read_pgm(pgm),
        origin=np.array(meta["origin"], dtype=float),
        row_dir=np.array(meta["row_dir"], dtype=float),
        col_dir=np.array(meta["col_dir"], dtype=float),
        pixel_spacing=float(meta["pixel_spacing"]),
        thickness=float(meta["thickness"]),
        label=meta["label"],
    )


# ---------------------------------------------------------------------------
# Contour CSV


def write_contour_csv(path, points_uv, first_col=None):
    pts = np.asarray(points_uv, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError(f"contour must be (N, 2), got {pts.shape}")
    if first_col is None:
        first_col = np.arange(pts.shape[0], dtype=float)
    lines = ["theta_or_index,u,v"]
    for c, (u, v) in zip(np.asarray(first_col, dtype=float), pts):
        lines.append(f"{c:.6f},{u:.6f},{v:.6f}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_contour_csv(path):
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "theta_or_index,u,v":
        raise ValidationError(f"{path} is not a contour CSV (bad header)")
    rows = [tuple(float(x) for x in ln.split(",")) for ln in lines[1:]]
    if not rows:
        raise ValidationError(f"{path} contains no contour points")
    arr = np.array(rows, dtype=float)
    return arr[:, 0], arr[:, 1:3]


# ---------------------------------------------------------------------------
# Bundles


@dataclass
class StudyBundle:
    sa: list                  # LGE SA SlicePlanes, base to apex
    cine: list                # cine SA SlicePlanes, same order
    la4c: object              # SlicePlane
    la2c: object              # SlicePlane
    apriori_endo: list        # (M, 2) cine-pixel contours per slice
    apriori_epi: list
    truth_endo: list = None   # optional, LGE-pixel contours per slice
    truth_epi: list = None
    path: str = ""

    @property
    def n_slices(self):
        return len(self.sa)

    @property
    def has_truth(self):
        return bool(self.truth_endo) and bool(self.truth_epi)


def _circle_thetas(n):
    return np.arange(n) * (2.0 * np.pi / n)


def _project_truth(truth):
    """Ground-truth world contours as per-slice pixel arrays.

    Contours are expressed in pixel coordinates of the rendered pixel grids,
    so they go through the poses the anatomy was rendered at (the ground-truth
    planes), not through any misaligned poses stored in the sidecars.
    """
    endo, epi = [], []
    for k, plane in enumerate(truth.sa_planes):
        eu, ev = plane.world_to_image(truth.endo_sa[k])
        pu, pv = plane.world_to_image(truth.epi_sa[k])
        endo.append(np.stack([eu, ev], axis=1))
        epi.append(np.stack([pu, pv], axis=1))
    return endo, epi


def bundle_from_study(study):
    """View a phantom study as an in-memory StudyBundle (no disk IO)."""
    apriori_endo, apriori_epi = _project_truth(study.truth_cine)
    truth_endo, truth_epi = _project_truth(study.truth_lge)
    return StudyBundle(sa=list(study.lge_sa), cine=list(study.cine_sa),
                       la4c=study.lge_la4c, la2c=study.lge_la2c,
                       apriori_endo=apriori_endo, apriori_epi=apriori_epi,
                       truth_endo=truth_endo, truth_epi=truth_epi)


def write_bundle(study, out_dir):
    """Write a generated phantom study as a bundle directory."""
    bundle = bundle_from_study(study)
    out = Path(out_dir)
    (out / "sa").mkdir(parents=True, exist_ok=True)
    (out / "cine").mkdir(exist_ok=True)
    (out / "apriori").mkdir(exist_ok=True)
    (out / "truth").mkdir(exist_ok=True)

    for k, plane in enumerate(bundle.sa):
        write_plane(out / "sa" / f"{k:04d}", plane)
    for k, plane in enumerate(bundle.cine):
        write_plane(out / "cine" / f"{k:04d}", plane)
    write_plane(out / "la4c", bundle.la4c)
    write_plane(out / "la2c", bundle.la2c)

    for k in range(bundle.n_slices):
        for kind, stack in (("endo", bundle.apriori_endo),
                            ("epi", bundle.apriori_epi)):
            write_contour_csv(out / "apriori" / f"{kind}_{k:04d}.csv", stack[k],
                              _circle_thetas(stack[k].shape[0]))
        for kind, stack in (("endo", bundle.truth_endo),
                            ("epi", bundle.truth_epi)):
            write_contour_csv(out / "truth" / f"{kind}_{k:04d}.csv", stack[k],
                              _circle_thetas(stack[k].shape[0]))
    with open(out / "phantom_spec.json", "w", encoding="ascii") as fh:
        json.dump(dataclasses.asdict(study.spec), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def _read_stack(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise ValidationError(f"missing bundle directory {directory}")
    indices = []
    for entry in directory.iterdir():
        match = _INDEX_RE.match(entry.name)
        if match:
            indices.append(int(match.group(1)))
    if not indices:
        raise ValidationError(f"no ####.pgm slices in {directory}")
    indices.sort()
    if indices != list(range(len(indices))):
        raise ValidationError(f"slice indices in {directory} are not contiguous from 0")
    return [read_plane(directory / f"{k:04d}") for k in indices]


def _read_contour_stack(directory, kind, n_slices, required=True):
    contours = []
    for k in range(n_slices):
        path = Path(directory) / f"{kind}_{k:04d}.csv"
        if not path.exists():
            if required:
                raise ValidationError(f"missing a-priori contour file {path}")
            return None
        contours.append(read_contour_csv(path)[1])
    return contours


def read_bundle(bundle_dir):
    root = Path(bundle_dir)
    if not root.is_dir():
        raise ValidationError(f"bundle directory {root} does not exist")
    sa = _read_stack(root / "sa")
    cine = _read_stack(root / "cine")
    if len(cine) != len(sa):
        raise ValidationError(f"cine stack has {len(cine)} slices, LGE SA has {len(sa)}")
    la4c = read_plane(root / "la4c")
    la2c = read_plane(root / "la2c")
    apriori_endo = _read_contour_stack(root / "apriori", "endo", len(sa))
    apriori_epi = _read_contour_stack(root / "apriori", "epi", len(sa))
    truth_endo = truth_epi = None
    if (root / "truth").is_dir():
        truth_endo = _read_contour_stack(root / "truth", "endo", len(sa), required=False)
        truth_epi = _read_contour_stack(root / "truth", "epi", len(sa), required=False)
    return StudyBundle(sa=sa, cine=cine, la4c=la4c, la2c=la2c,
                       apriori_endo=apriori_endo, apriori_epi=apriori_epi,
                       truth_endo=truth_endo, truth_epi=truth_epi, path=str(root))
