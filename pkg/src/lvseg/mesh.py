"""Paired endo/epicardial simplex meshes: construction, deformation, slicing.

Meshes live in the isotropic pixel frame of a reference SA slice (the last
one). Each contour stack slice is resampled at evenly spaced angles about its
own centroid; extra rings are linearly interpolated between adjacent slices.
Interior vertices have exactly three neighbors (ring above, ring below, and
an alternating in-ring partner); the two extreme rings are planar closed
polylines whose vertices keep their two in-ring neighbors and never move out
of plane.

Deformation iterates a damped explicit update driven by three forces: a
smoothing force (tangential pull toward the in-ring neighbor midpoint plus a
normal pull toward the ring neighbors' mean simplex elevation), a weighted
closest-edge-point attraction gated by a projected-distance cutoff, and a
spring force preserving the initial endo-epi pairing offsets. The epicardial
mesh updates first against fixed endocardial positions, then the endocardial
mesh against the new epicardial positions.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import NumericFailure, ValidationError
from .geometry import PlaneFrame, star_polygon_radii


@dataclass
class SimplexMesh:
    vertices: np.ndarray      # (N, 3) reference-frame isotropic px
    neighbors: np.ndarray     # (N, 3) int, -1 padding on boundary rings
    rings: np.ndarray         # (R, n) vertex indices, ring-major layout
    boundary: np.ndarray      # (N,) bool, True on the two extreme rings
    role: str                 # "endo" | "epi"
    frame: PlaneFrame

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.neighbors = np.asarray(self.neighbors, dtype=int)
        self.rings = np.asarray(self.rings, dtype=int)
        self.boundary = np.asarray(self.boundary, dtype=bool)

    @property
    def n_rings(self):
        return self.rings.shape[0]

    @property
    def n_ring_vertices(self):
        return self.rings.shape[1]

    @property
    def ring_of(self):
        return np.repeat(np.arange(self.n_rings), self.n_ring_vertices)

    def neighbor_lists(self):
        return [[j for j in row if j >= 0] for row in self.neighbors]

    def degrees(self):
        return (self.neighbors >= 0).sum(axis=1)

    def copy(self):
        return SimplexMesh(
            vertices=self.vertices.copy(), neighbors=self.neighbors,
            rings=self.rings, boundary=self.boundary, role=self.role,
            frame=self.frame,
        )

    def validate(self):
        n_total = self.n_rings * self.n_ring_vertices
        if self.vertices.shape != (n_total, 3):
            raise ValidationError(
                f"vertex count {self.vertices.shape} != rings x ring size ({n_total}, 3)")
        deg = self.degrees()
        if not np.all(deg[self.boundary] == 2):
            raise ValidationError("boundary-ring vertices must have exactly 2 neighbors")
        if not np.all(deg[~self.boundary] == 3):
            raise ValidationError("interior vertices must have exactly 3 neighbors")
        return self


@dataclass
class VertexPairing:
    endo_to_epi: np.ndarray    # (N,) int
    offsets0: np.ndarray       # (N, 3) initial epi - endo vectors

    def validate(self):
        n = self.endo_to_epi.shape[0]
        if sorted(self.endo_to_epi.tolist()) != list(range(n)):
            raise ValidationError("endo-to-epi pairing must be a bijection")
        return self


@dataclass(frozen=True)
class DeformParams:
    gamma: float = 0.7
    alpha: float = 0.3
    beta: float = 0.3
    mu: float = 0.1
    d_cutoff: float = 3.0
    max_iters: int = 30
    min_move: float = 0.1

    def validate(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValidationError(f"gamma must be in (0, 1], got {self.gamma}")
        if min(self.alpha, self.beta, self.mu) < 0:
            raise ValidationError("force weights must be >= 0")
        if self.d_cutoff <= 0:
            raise ValidationError(f"d_cutoff must be positive, got {self.d_cutoff}")
        if self.max_iters < 0 or self.min_move < 0:
            raise ValidationError("max_iters and min_move must be >= 0")
        return self


def _resample_ring(contour_frame_xy, z, n_ring_vertices):
    center = contour_frame_xy.mean(axis=0)
    angles = np.arange(n_ring_vertices) * (2.0 * np.pi / n_ring_vertices)
    radii = star_polygon_radii(contour_frame_xy, center, angles)
    ring = np.empty((n_ring_vertices, 3))
    ring[:, 0] = center[0] + radii * np.cos(angles)
    ring[:, 1] = center[1] + radii * np.sin(angles)
    ring[:, 2] = z
    return ring


def build_meshes(endo_contours_world, epi_contours_world, frame,
                 n_ring_vertices=80, n_interp_rings=3):
    """Build the paired endo/epi simplex meshes from per-slice contour stacks.

    Contours are given as (M, 3) world-coordinate polygons, base to apex; all
    coordinates are transformed into `frame` (the last SA slice's isotropic
    pixel frame). Returns (endo_mesh, epi_mesh, pairing).
    """
    if len(endo_contours_world) != len(epi_contours_world):
        raise ValidationError("need matching endo and epi contour stacks")
    n_slices = len(endo_contours_world)
    if n_slices < 3:
        raise ValidationError(f"mesh construction needs >= 3 slices, got {n_slices}")
    if n_ring_vertices < 4 or n_ring_vertices % 2 != 0:
        raise ValidationError(
            f"n_ring_vertices must be an even count >= 4, got {n_ring_vertices}")
    if n_interp_rings < 0:
        raise ValidationError(f"n_interp_rings must be >= 0, got {n_interp_rings}")

    def physical_rings(contours):
        rings = []
        for contour in contours:
            pts = frame.to_frame(np.asarray(contour, dtype=float))
            rings.append(_resample_ring(pts[:, :2], pts[:, 2].mean(), n_ring_vertices))
        return rings

    def all_rings(phys):
        rings = []
        for k in range(n_slices - 1):
            rings.append(phys[k])
            for i in range(1, n_interp_rings + 1):
                f = i / (n_interp_rings + 1)
                rings.append((1.0 - f) * phys[k] + f * phys[k + 1])
        rings.append(phys[-1])
        return np.array(rings)

    n_rings = n_slices + (n_slices - 1) * n_interp_rings
    ring_index = np.arange(n_rings * n_ring_vertices).reshape(n_rings, n_ring_vertices)
    neighbors = np.full((n_rings * n_ring_vertices, 3), -1, dtype=int)
    boundary = np.zeros(n_rings * n_ring_vertices, dtype=bool)
    boundary[ring_index[0]] = True
    boundary[ring_index[-1]] = True
    j = np.arange(n_ring_vertices)
    for r in range(n_rings):
        idx = ring_index[r]
        if r in (0, n_rings - 1):
            neighbors[idx, 0] = ring_index[r, (j - 1) % n_ring_vertices]
            neighbors[idx, 1] = ring_index[r, (j + 1) % n_ring_vertices]
        else:
            neighbors[idx, 0] = ring_index[r - 1, j]
            neighbors[idx, 1] = ring_index[r + 1, j]
            neighbors[idx, 2] = ring_index[r, j ^ 1]

    meshes = []
    for role, contours in (("endo", endo_contours_world), ("epi", epi_contours_world)):
        verts = all_rings(physical_rings(contours)).reshape(-1, 3)
        meshes.append(SimplexMesh(vertices=verts, neighbors=neighbors,
                                  rings=ring_index, boundary=boundary,
                                  role=role, frame=frame).validate())
    endo_mesh, epi_mesh = meshes
    pairing = VertexPairing(
        endo_to_epi=np.arange(endo_mesh.vertices.shape[0]),
        offsets0=epi_mesh.vertices - endo_mesh.vertices,
    ).validate()
    return endo_mesh, epi_mesh, pairing


# ---------------------------------------------------------------------------
# Normals and forces


def _ring_structure(mesh):
    n = mesh.n_ring_vertices
    j = np.arange(n)
    prev_idx = np.empty(mesh.vertices.shape[0], dtype=int)
    next_idx = np.empty(mesh.vertices.shape[0], dtype=int)
    for r in range(mesh.n_rings):
        idx = mesh.rings[r]
        prev_idx[idx] = mesh.rings[r, (j - 1) % n]
        next_idx[idx] = mesh.rings[r, (j + 1) % n]
    return prev_idx, next_idx


def vertex_normals(mesh):
    """Outward unit normals: oriented neighbor-triangle normals for interior
    vertices, in-plane radial directions for boundary-ring vertices."""
    v = mesh.vertices
    ring_centers = v[mesh.rings].mean(axis=1)
    radial = v - ring_centers[mesh.ring_of]
    normals = np.zeros_like(v)

    interior = ~mesh.boundary
    nb = mesh.neighbors[interior]
    p0, p1, p2 = v[nb[:, 0]], v[nb[:, 1]], v[nb[:, 2]]
    tri = np.cross(p1 - p0, p2 - p0)
    flip = (tri * radial[interior]).sum(axis=1) < 0
    tri[flip] *= -1.0
    norm = np.linalg.norm(tri, axis=1, keepdims=True)
    small = norm[:, 0] < 1e-12
    if small.any():
        fallback = radial[interior][small]
        fallback /= np.maximum(np.linalg.norm(fallback, axis=1, keepdims=True), 1e-12)
        tri[small] = fallback
        norm = np.linalg.norm(tri, axis=1, keepdims=True)
    normals[interior] = tri / norm

    flat = radial[mesh.boundary].copy()
    flat[:, 2] = 0.0
    flat /= np.maximum(np.linalg.norm(flat, axis=1, keepdims=True), 1e-12)
    normals[mesh.boundary] = flat
    return normals


def smooth_forces(mesh, normals=None):
    """Smoothing displacement for every vertex.

    Tangential part of the pull toward the in-ring neighbor midpoint, plus a
    normal pull toward the mean simplex elevation of the two ring neighbors.
    Elevation is the signed offset along the vertex normal from the neighbor
    barycenter (all three neighbors for interior vertices, the in-ring
    midpoint for boundary vertices, whose z component is also forced to
    zero). Regular rings with matched neighbor rings are fixed points.
    """
    v = mesh.vertices
    if normals is None:
        normals = vertex_normals(mesh)
    prev_idx, next_idx = _ring_structure(mesh)
    midpoint = 0.5 * (v[prev_idx] + v[next_idx])
    pull = midpoint - v

    elevation = np.empty(v.shape[0])
    interior = ~mesh.boundary
    nb = mesh.neighbors[interior]
    barycenter = (v[nb[:, 0]] + v[nb[:, 1]] + v[nb[:, 2]]) / 3.0
    elevation[interior] = ((v[interior] - barycenter) * normals[interior]).sum(axis=1)
    elevation[mesh.boundary] = (
        (v[mesh.boundary] - midpoint[mesh.boundary]) * normals[mesh.boundary]
    ).sum(axis=1)

    tangential = pull - ((pull * normals).sum(axis=1, keepdims=True)) * normals
    target = 0.5 * (elevation[prev_idx] + elevation[next_idx])
    forces = tangential + (target - elevation)[:, None] * normals
    forces[mesh.boundary, 2] = 0.0
    return forces


def smooth_force(mesh, vertex_idx):
    """Smoothing force of a single vertex (see smooth_forces)."""
    return smooth_forces(mesh)[int(vertex_idx)]


def edge_force(position, normal, edge_positions, edge_weights, d_cutoff):
    """Closest-edge-point attraction for one vertex.

    F = w * G(((closest - p) . n) / d_cutoff) * n with the symmetric gate
    G(x) = x for |x| <= 1 and 0 beyond; empty point sets give zero force.
    """
    pts = np.asarray(edge_positions, dtype=float)
    if pts.size == 0:
        return np.zeros(3)
    position = np.asarray(position, dtype=float)
    normal = np.asarray(normal, dtype=float)
    d2 = ((pts - position) ** 2).sum(axis=1)
    i = int(np.argmin(d2))
    x = float((pts[i] - position) @ normal) / float(d_cutoff)
    if abs(x) > 1.0:
        return np.zeros(3)
    return float(edge_weights[i]) * x * normal


def _edge_forces(vertices, normals, tree, positions, weights, d_cutoff):
    if tree is None:
        return np.zeros_like(vertices)
    _, idx = tree.query(vertices)
    x = ((positions[idx] - vertices) * normals).sum(axis=1) / d_cutoff
    gate = np.abs(x) <= 1.0
    return np.where(gate[:, None], (weights[idx] * x)[:, None] * normals, 0.0)


def thickness_forces(pairing, endo_pts, epi_pts):
    """Pairing spring forces (endo force, epi force)."""
    epi_of_endo = epi_pts[pairing.endo_to_epi]
    f_endo = epi_of_endo - pairing.offsets0 - endo_pts
    f_epi_on_pairs = endo_pts + pairing.offsets0 - epi_of_endo
    f_epi = np.zeros_like(epi_pts)
    f_epi[pairing.endo_to_epi] = f_epi_on_pairs
    return f_endo, f_epi


# ---------------------------------------------------------------------------
# Deformation


def _check_finite(arr, role, what):
    if not np.isfinite(arr).all():
        bad = int(np.argwhere(~np.isfinite(arr).all(axis=1))[0, 0])
        raise NumericFailure(f"non-finite {what} at {role} vertex {bad}")


def deform(endo, epi, pairing, edge_points, params=DeformParams()):
    """Deform the paired meshes toward weighted edge points.

    edge_points: iterable of objects with .position (world mm), .kind
    ("endo"/"epi"), and .weight. Returns (endo_out, epi_out, log) where log is
    a list of per-iteration dicts; inputs are not mutated. Boundary-ring z
    coordinates are restored bit-exactly after every update.
    """
    params.validate()
    endo = endo.copy()
    epi = epi.copy()
    frame = endo.frame

    trees, positions, weights = {}, {}, {}
    for kind in ("endo", "epi"):
        pts = [p for p in edge_points if p.kind == kind]
        if pts:
            pos = np.array([frame.to_frame(p.position) for p in pts], dtype=float)
            wts = np.array([p.weight for p in pts], dtype=float)
            _check_finite(pos, kind, "edge point")
            trees[kind] = cKDTree(pos)
            positions[kind] = pos
            weights[kind] = wts
        else:
            trees[kind] = None
            positions[kind] = np.zeros((0, 3))
            weights[kind] = np.zeros(0)

    meshes = {"endo": endo, "epi": epi}
    prev = {k: m.vertices.copy() for k, m in meshes.items()}
    z0 = {k: m.vertices[m.boundary, 2].copy() for k, m in meshes.items()}
    log = []
    converged = False
    for iteration in range(1, params.max_iters + 1):
        moves = {}
        for role in ("epi", "endo"):
            mesh = meshes[role]
            v = mesh.vertices
            normals = vertex_normals(mesh)
            f_s = smooth_forces(mesh, normals)
            f_e = _edge_forces(v, normals, trees[role], positions[role],
                               weights[role], params.d_cutoff)
            f_endo_t, f_epi_t = thickness_forces(
                pairing, meshes["endo"].vertices, meshes["epi"].vertices)
            f_t = f_epi_t if role == "epi" else f_endo_t
            for name, f in (("smooth force", f_s), ("edge force", f_e),
                            ("thickness force", f_t)):
                _check_finite(f, role, name)
            new_v = (v + (1.0 - params.gamma) * (v - prev[role])
                     + params.alpha * f_s + params.beta * f_e + params.mu * f_t)
            new_v[mesh.boundary, 2] = z0[role]
            _check_finite(new_v, role, "updated position")
            moves[role] = float(np.linalg.norm(new_v - v, axis=1).max())
            prev[role] = v
            mesh.vertices = new_v
        log.append({"iteration": iteration,
                    "max_move_epi": moves["epi"],
                    "max_move_endo": moves["endo"]})
        if max(moves.values()) < params.min_move:
            converged = True
            break
    log.append({"converged": converged, "iterations": len(log)})
    return meshes["endo"], meshes["epi"], log


# ---------------------------------------------------------------------------
# Slicing and export


def _mesh_edges(mesh):
    pairs = set()
    for i, row in enumerate(mesh.neighbors):
        for j in row:
            if j >= 0:
                pairs.add((min(i, int(j)), max(i, int(j))))
    return sorted(pairs)


def slice_mesh(mesh, plane, tol=1e-9):
    """Intersect a mesh with an image plane.

    Returns the crossing points as a closed contour (K, 2) in the plane's
    pixel coordinates, ordered by azimuth about their centroid; an empty
    (0, 2) array when the plane misses the mesh.
    """
    world = mesh.frame.to_world(mesh.vertices)
    f = (world - plane.origin) @ plane.normal
    points = [world[i] for i in np.flatnonzero(np.abs(f) <= tol)]
    for i, j in _mesh_edges(mesh):
        fi, fj = f[i], f[j]
        if (fi < -tol and fj > tol) or (fi > tol and fj < -tol):
            points.append(world[i] + (fi / (fi - fj)) * (world[j] - world[i]))
    if not points:
        return np.zeros((0, 2))
    uv = np.array([plane.world_to_image(p) for p in points], dtype=float)
    uv = np.unique(np.round(uv, 9), axis=0)
    center = uv.mean(axis=0)
    order = np.argsort(np.arctan2(uv[:, 1] - center[1], uv[:, 0] - center[0]))
    return uv[order]


def export_obj(path, meshes):
    """Write meshes as Wavefront OBJ (world coordinates, quad tube faces).

    meshes: mapping of object name -> SimplexMesh.
    """
    lines = []
    offset = 0
    for name, mesh in meshes.items():
        lines.append(f"o {name}")
        world = mesh.frame.to_world(mesh.vertices)
        for p in world:
            lines.append(f"v {p[0]:.6f} {p[1]:.6f} {p[2]:.6f}")
        n = mesh.n_ring_vertices
        for r in range(mesh.n_rings - 1):
            for j in range(n):
                a = mesh.rings[r, j] + 1 + offset
                b = mesh.rings[r, (j + 1) % n] + 1 + offset
                c = mesh.rings[r + 1, (j + 1) % n] + 1 + offset
                d = mesh.rings[r + 1, j] + 1 + offset
                lines.append(f"f {a} {b} {c} {d}")
        offset += world.shape[0]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
