"""Projection of per-vertex tangent directions into a smoothed UV-space unit
vector field: tangent re-projection, one-ring tracing with local flattening,
barycentric transfer to UV, seam replication, and sign-aligned Laplacian
smoothing.

Directions inherit the sign ambiguity of principal curvature directions;
averaging therefore always flips neighbors into the hemisphere of the anchor
being updated so antipodal entries reinforce instead of cancelling.
"""

import json
from dataclasses import dataclass

import numpy as np

from .baking import barycentric_coords
from .errors import DegenerateTriangleError, EmptyFieldError
from .mesh import build_adjacency

HIT_TOL = 1e-6
SEAM_UV_DISTANCE = 0.25


@dataclass(frozen=True)
class TraceResult:
    """Outcome of tracing a tangent step from a vertex into an incident,
    flattened triangle. ``status`` is "hit", "miss" or "degenerate"."""

    status: str
    face: int = -1
    bary: tuple = (0.0, 0.0, 0.0)
    uv_end: tuple = (0.0, 0.0)


@dataclass(frozen=True)
class UVVectorField:
    """Anchors of the UV vector field, stored as parallel arrays.

    One anchor exists per (vertex, owned uv index) pair; ``valid`` marks
    anchors whose trace succeeded (or that were in-filled by smoothing).
    """

    uv: np.ndarray
    dir: np.ndarray
    source_vertex: np.ndarray
    valid: np.ndarray

    def __len__(self):
        return self.uv.shape[0]

    @property
    def num_valid(self):
        return int(np.count_nonzero(self.valid))


def project_to_tangent(d, n):
    """Remove the normal component: d - (d . n) n.

    Returns (projected, degenerate_flag); the flag is set when the input is
    (numerically) parallel to the normal.
    """
    d = np.asarray(d, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    out = d - np.dot(d, n) * n
    return out, bool(np.linalg.norm(out) < 1e-9)


def _rotate_into_plane(vec, from_n, to_n):
    """Rodrigues rotation taking ``from_n`` onto ``to_n``, applied to vec."""
    c = float(np.clip(np.dot(from_n, to_n), -1.0, 1.0))
    axis = np.cross(from_n, to_n)
    s = np.linalg.norm(axis)
    if s < 1e-12:
        if c > 0:
            return vec
        return None  # antiparallel: fold direction undefined
    axis = axis / s
    return (vec * c + np.cross(axis, vec) * s
            + axis * np.dot(axis, vec) * (1.0 - c))


def _rigid_face_image(mesh, face, vertex, normal, e1, e2):
    """2D images of a face's two non-apex corners after rigidly rotating the
    face into the tangent plane at ``vertex`` (apex maps to the origin)."""
    tri = mesh.triangles[face]
    pts = mesh.positions[tri]
    face_n = np.cross(pts[1] - pts[0], pts[2] - pts[0])
    n_len = np.linalg.norm(face_n)
    if n_len < 1e-15:
        return None
    face_n = face_n / n_len
    if np.dot(face_n, normal) < 0:
        face_n = -face_n
    images = {}
    v0 = mesh.positions[vertex]
    for k in range(3):
        if tri[k] == vertex:
            continue
        flat = _rotate_into_plane(pts[k] - v0, face_n, normal)
        if flat is None:
            return None
        images[int(tri[k])] = np.array([np.dot(flat, e1), np.dot(flat, e2)])
    return images


def _unfold_fan(mesh, adjacency, vertex, normal, e1, e2):
    """Unfold the incident faces of ``vertex`` into the tangent plane by
    rotating about shared edges: consecutive faces share their hinge edge
    image exactly. Closed fans get their apex angles scaled by 2*pi / total
    so the disk is tiled seamlessly (no gap at the angle defect); boundary
    fans keep exact angles, leaving off-surface directions to miss honestly.

    Returns a list of (face, corners2) in fan order, or None when the local
    topology is not a manifold fan (caller falls back to per-face rotation).
    """
    faces = adjacency.vertex_to_faces[vertex]
    v0 = mesh.positions[vertex]
    wings = {}
    wing_faces = {}
    for f in faces:
        others = [int(x) for x in mesh.triangles[f] if x != vertex]
        if len(others) != 2:
            return None
        wings[f] = tuple(others)
        for w in others:
            wing_faces.setdefault(w, []).append(f)
    if any(len(fs) > 2 for fs in wing_faces.values()):
        return None

    boundary = sorted(w for w, fs in wing_faces.items() if len(fs) == 1)
    if boundary:
        start_w = min(boundary, key=lambda w: (wing_faces[w][0], w))
        start_f = wing_faces[start_w][0]
    else:
        start_f = min(faces)
        start_w = min(wings[start_f])

    # chain the umbrella by hopping across shared edges
    chain = []
    visited = set()
    f, w_in = start_f, start_w
    closed = False
    while True:
        w_out = wings[f][1] if wings[f][0] == w_in else wings[f][0]
        a = mesh.positions[w_in] - v0
        b = mesh.positions[w_out] - v0
        r_in = np.linalg.norm(a)
        r_out = np.linalg.norm(b)
        if r_in < 1e-15 or r_out < 1e-15:
            return None
        alpha = np.arctan2(np.linalg.norm(np.cross(a, b)), np.dot(a, b))
        chain.append((int(f), int(w_in), int(w_out), r_in, r_out, alpha))
        visited.add(f)
        nxt = [g for g in wing_faces[w_out] if g != f]
        if not nxt:
            break
        if nxt[0] in visited:
            closed = nxt[0] == start_f and w_out == start_w
            break
        f, w_in = nxt[0], w_out
    if len(visited) != len(faces):
        return None  # disconnected fan (non-manifold umbrella)

    total = sum(c[5] for c in chain)
    if total < 1e-9:
        return None
    scale = (2.0 * np.pi / total) if closed else 1.0

    first = _rigid_face_image(mesh, start_f, vertex, normal, e1, e2)
    if first is None:
        return None
    other_w = wings[start_f][1] if wings[start_f][0] == start_w else wings[start_f][0]
    img_in = first[start_w]
    img_out = first[other_w]
    orientation = 1.0 if img_in[0] * img_out[1] - img_in[1] * img_out[0] >= 0 else -1.0
    phi = np.arctan2(img_in[1], img_in[0])

    layout = []
    for f, w_in, w_out, r_in, r_out, alpha in chain:
        phi_out = phi + orientation * alpha * scale
        p_in = np.array([r_in * np.cos(phi), r_in * np.sin(phi)])
        p_out = np.array([r_out * np.cos(phi_out), r_out * np.sin(phi_out)])
        corners2 = np.zeros((3, 2))
        for k, vid in enumerate(mesh.triangles[f]):
            if int(vid) == w_in:
                corners2[k] = p_in
            elif int(vid) == w_out:
                corners2[k] = p_out
        layout.append((f, corners2))
        phi = phi_out
    return layout


def trace_to_uv(mesh, adjacency, vertex, d_tan):
    """Trace a tangent step from ``vertex`` and land it in UV space.

    The step length is half the shortest incident edge (scale-invariant
    locality). The one-ring is unfolded into the tangent plane about shared
    edges; the first fan triangle containing the stepped point with
    barycentric tolerance -1e-6 wins. In-tolerance negative weights are
    clamped to 0 and renormalized, so returned weights are nonnegative.
    """
    d_tan = np.asarray(d_tan, dtype=np.float64)
    step_dir_norm = np.linalg.norm(d_tan)
    faces = adjacency.vertex_to_faces[vertex]
    if step_dir_norm < 1e-12 or not faces:
        return TraceResult(status="degenerate")
    normal = mesh.vertex_normals[vertex]
    if np.linalg.norm(normal) < 0.5:
        return TraceResult(status="degenerate")

    v0 = mesh.positions[vertex]
    shortest = np.inf
    for f in faces:
        for other in mesh.triangles[f]:
            if other != vertex:
                shortest = min(shortest,
                               np.linalg.norm(mesh.positions[other] - v0))
    if not np.isfinite(shortest) or shortest < 1e-12:
        return TraceResult(status="degenerate")

    step = 0.5 * shortest
    p_local = (d_tan / step_dir_norm) * step  # lies in the tangent plane

    from .curvature import tangent_basis
    e1, e2 = tangent_basis(normal)
    p2 = np.array([np.dot(p_local, e1), np.dot(p_local, e2)])

    layout = _unfold_fan(mesh, adjacency, vertex, normal, e1, e2)
    if layout is None:
        # non-manifold umbrella: independent per-face rotation fallback
        layout = []
        for f in faces:
            images = _rigid_face_image(mesh, f, vertex, normal, e1, e2)
            if images is None:
                continue
            corners2 = np.zeros((3, 2))
            for k, vid in enumerate(mesh.triangles[f]):
                corners2[k] = images.get(int(vid), np.zeros(2))
            layout.append((int(f), corners2))
    if not layout:
        return TraceResult(status="degenerate")

    for f, corners2 in layout:
        try:
            bary = barycentric_coords(p2, corners2)
        except DegenerateTriangleError:
            continue
        if (bary >= -HIT_TOL).all():
            bary = np.clip(bary, 0.0, None)
            bary = bary / bary.sum()
            uv_tri = mesh.uv_coords[mesh.triangle_uvs[f]]
            uv_end = bary @ uv_tri
            return TraceResult(status="hit", face=int(f),
                               bary=tuple(float(x) for x in bary),
                               uv_end=(float(uv_end[0]), float(uv_end[1])))
    return TraceResult(status="miss")


def build_uv_field(mesh, adjacency, curvature, which="min"):
    """Trace every vertex's principal direction into UV space.

    On a hit the anchor direction is normalize(uv_end - uv_orig), where
    uv_orig is the vertex's uv corner in the hit face; the direction is
    replicated to every uv index the vertex owns (seams). Misses become
    invalid anchors for smoothing to in-fill.
    """
    if which not in ("min", "max"):
        raise ValueError("which must be 'min' or 'max'")
    dirs3d = curvature.dir_min if which == "min" else curvature.dir_max

    uv_rows = []
    dir_rows = []
    vert_rows = []
    valid_rows = []
    for v in range(mesh.num_vertices):
        uv_ids = adjacency.vertex_to_uv_indices[v]
        if not uv_ids:
            continue
        d_tan, degenerate = project_to_tangent(dirs3d[v],
                                               mesh.vertex_normals[v])
        result = TraceResult(status="degenerate")
        if not degenerate:
            result = trace_to_uv(mesh, adjacency, v, d_tan)

        dir_uv = np.zeros(2)
        ok = False
        if result.status == "hit":
            face_uv_ids = mesh.triangle_uvs[result.face]
            face_tri = mesh.triangles[result.face]
            corner = int(np.flatnonzero(face_tri == v)[0])
            uv_orig = mesh.uv_coords[face_uv_ids[corner]]
            delta = np.asarray(result.uv_end) - uv_orig
            norm = np.linalg.norm(delta)
            if norm > 1e-12:
                dir_uv = delta / norm
                ok = True
        for t in uv_ids:
            uv_rows.append(mesh.uv_coords[t])
            dir_rows.append(dir_uv)
            vert_rows.append(v)
            valid_rows.append(ok)

    return UVVectorField(
        uv=np.asarray(uv_rows, dtype=np.float64).reshape(-1, 2),
        dir=np.asarray(dir_rows, dtype=np.float64).reshape(-1, 2),
        source_vertex=np.asarray(vert_rows, dtype=np.int64),
        valid=np.asarray(valid_rows, dtype=bool),
    )


def _anchor_neighbors(field, adjacency):
    """Neighbor anchor indices: source vertices one-ring adjacent AND uv
    distance below the seam gate (stay on one chart)."""
    by_vertex = {}
    for idx, v in enumerate(field.source_vertex):
        by_vertex.setdefault(int(v), []).append(idx)
    neighbors = []
    for idx in range(len(field)):
        v = int(field.source_vertex[idx])
        cand = []
        for w in adjacency.vertex_one_ring[v]:
            cand.extend(by_vertex.get(int(w), ()))
        uv = field.uv[idx]
        near = [k for k in cand
                if np.linalg.norm(field.uv[k] - uv) < SEAM_UV_DISTANCE]
        neighbors.append(tuple(near))
    return neighbors


def smooth_uv_field(field, adjacency, iterations=3):
    """In-fill invalid anchors, then run sign-aligned Jacobi smoothing.

    Phase 1 repeats until every anchor is valid or no progress is possible
    (isolated invalid anchors stay invalid and are reported). Phase 2 runs
    ``iterations`` synchronous rounds of
    dir_i <- normalize(mean_j sign(dir_i . dir_j) dir_j) over valid
    neighbors. Valid-anchor count never decreases.
    """
    if field.num_valid == 0:
        raise EmptyFieldError("no valid anchors to smooth from")
    neighbors = _anchor_neighbors(field, adjacency)
    dirs = field.dir.copy()
    valid = field.valid.copy()

    while True:
        updates = {}
        for idx in range(len(field)):
            if valid[idx]:
                continue
            donors = [k for k in neighbors[idx] if valid[k]]
            if not donors:
                continue
            ref = dirs[donors[0]]
            acc = np.zeros(2)
            for k in donors:
                d = dirs[k]
                acc += d if np.dot(d, ref) >= 0 else -d
            norm = np.linalg.norm(acc)
            updates[idx] = acc / norm if norm > 1e-12 else ref
        if not updates:
            break
        for idx, d in updates.items():
            dirs[idx] = d
            valid[idx] = True

    for _ in range(iterations):
        new_dirs = dirs.copy()
        for idx in range(len(field)):
            if not valid[idx]:
                continue
            donors = [k for k in neighbors[idx] if valid[k]]
            if not donors:
                continue
            me = dirs[idx]
            acc = np.zeros(2)
            for k in donors:
                d = dirs[k]
                acc += d if np.dot(me, d) >= 0 else -d
            acc /= len(donors)
            norm = np.linalg.norm(acc)
            if norm > 1e-12:
                new_dirs[idx] = acc / norm
        dirs = new_dirs

    dirs.flags.writeable = False
    valid.flags.writeable = False
    return UVVectorField(uv=field.uv, dir=dirs,
                         source_vertex=field.source_vertex, valid=valid)


def save_field_jsonl(field, path):
    """One anchor per line: {"uv": [u, v], "dir": [x, y], "vertex": i,
    "valid": bool}, floats at 9 significant digits."""
    def fmt(x):
        return float(f"{x:.9g}")

    with open(path, "w") as fh:
        for k in range(len(field)):
            fh.write(json.dumps({
                "uv": [fmt(field.uv[k, 0]), fmt(field.uv[k, 1])],
                "dir": [fmt(field.dir[k, 0]), fmt(field.dir[k, 1])],
                "vertex": int(field.source_vertex[k]),
                "valid": bool(field.valid[k]),
            }) + "\n")


def load_field_jsonl(path):
    uv, dirs, verts, valid = [], [], [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            uv.append(rec["uv"])
            dirs.append(rec["dir"])
            verts.append(rec["vertex"])
            valid.append(rec["valid"])
    return UVVectorField(uv=np.asarray(uv, dtype=np.float64).reshape(-1, 2),
                         dir=np.asarray(dirs, dtype=np.float64).reshape(-1, 2),
                         source_vertex=np.asarray(verts, dtype=np.int64),
                         valid=np.asarray(valid, dtype=bool))
