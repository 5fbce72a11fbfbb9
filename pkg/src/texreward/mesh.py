"""Indexed UV-mapped triangle meshes: OBJ subset parsing, validation,
angle-weighted vertex normals, and the adjacency maps every other module
builds on.

Conventions fixed here for the whole package:
  * UV origin (0,0) is the bottom-left of the texture; OBJ ``vt`` is used
    unflipped.
  * Raster row 0 is the TOP image row, so texel lookup is
    ``row = (H-1) * (1-v)``, ``col = (W-1) * u``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    MeshValidationError,
    MissingUVError,
    ObjParseError,
    TexRewardWarning,
    UnsupportedFaceError,
)

DEGENERATE_AREA = 1e-12


@dataclass(frozen=True)
class MeshDiagnostics:
    """Non-fatal findings collected while building a mesh."""

    dropped_degenerate: int = 0
    ignored_directives: int = 0
    zero_normal_vertices: tuple = ()


@dataclass(frozen=True)
class Mesh:
    """Immutable indexed triangle mesh with per-corner UV coordinates.

    Attributes:
        positions: (N, 3) float64 vertex positions in model units.
        triangles: (F, 3) int32 position indices.
        uv_coords: (M, 2) float64 texture coordinates in [0, 1]^2.
        triangle_uvs: (F, 3) int32 uv indices, parallel to ``triangles``.
        vertex_normals: (N, 3) float64 unit normals (zero where flagged).
        diagnostics: validation findings (dropped faces, flagged vertices).
    """

    positions: np.ndarray
    triangles: np.ndarray
    uv_coords: np.ndarray
    triangle_uvs: np.ndarray
    vertex_normals: np.ndarray
    diagnostics: MeshDiagnostics = field(default_factory=MeshDiagnostics)

    @property
    def num_vertices(self):
        return self.positions.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    def bounding_box_diagonal(self):
        if self.num_vertices == 0:
            return 0.0
        extent = self.positions.max(axis=0) - self.positions.min(axis=0)
        return float(np.linalg.norm(extent))


@dataclass(frozen=True)
class Adjacency:
    """Incidence maps derived from a mesh.

    ``vertex_to_uv_indices`` lists the distinct uv indices each vertex owns,
    in order of first appearance; seam vertices own more than one.
    """

    vertex_to_faces: tuple
    vertex_one_ring: tuple
    vertex_to_uv_indices: tuple


def _freeze(arr):
    arr.flags.writeable = False
    return arr


def triangle_areas(positions, triangles):
    """Unsigned areas of every triangle, (F,) float64."""
    a = positions[triangles[:, 0]]
    b = positions[triangles[:, 1]]
    c = positions[triangles[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def compute_vertex_normals(positions, triangles):
    """Angle-weighted vertex normals, deterministic under triangle reordering.

    Each corner contributes ``corner_angle * unit_face_normal`` to its vertex;
    contributions are sorted per vertex before summation so any permutation of
    the triangle list yields bit-identical output.

    Returns:
        (normals, flagged): (N, 3) unit normals, and a tuple of vertex ids
        that had no non-degenerate incident face (their normal is zero).
    """
    n_verts = positions.shape[0]
    normals = np.zeros((n_verts, 3))
    if triangles.shape[0] == 0:
        return normals, tuple(range(n_verts))

    a = positions[triangles[:, 0]]
    b = positions[triangles[:, 1]]
    c = positions[triangles[:, 2]]
    face_n = np.cross(b - a, c - a)
    face_len = np.linalg.norm(face_n, axis=1)
    ok = face_len > 2.0 * DEGENERATE_AREA
    unit_n = np.zeros_like(face_n)
    unit_n[ok] = face_n[ok] / face_len[ok][:, None]

    corners = []
    for k in range(3):
        p = positions[triangles[:, k]]
        e1 = positions[triangles[:, (k + 1) % 3]] - p
        e2 = positions[triangles[:, (k + 2) % 3]] - p
        cross_norm = np.linalg.norm(np.cross(e1, e2), axis=1)
        dot = np.einsum("ij,ij->i", e1, e2)
        angle = np.arctan2(cross_norm, dot)
        corners.append((triangles[:, k], angle[:, None] * unit_n))

    vidx = np.concatenate([c[0] for c in corners])
    contrib = np.concatenate([c[1] for c in corners])
    keep = np.concatenate([ok, ok, ok])
    vidx = vidx[keep]
    contrib = contrib[keep]

    if vidx.size:
        order = np.lexsort((contrib[:, 2], contrib[:, 1], contrib[:, 0], vidx))
        vidx = vidx[order]
        contrib = contrib[order]
        starts = np.flatnonzero(np.r_[True, vidx[1:] != vidx[:-1]])
        sums = np.add.reduceat(contrib, starts, axis=0)
        normals[vidx[starts]] = sums

    lengths = np.linalg.norm(normals, axis=1)
    flagged = lengths < 1e-12
    normals[~flagged] /= lengths[~flagged][:, None]
    normals[flagged] = 0.0
    return normals, tuple(int(i) for i in np.flatnonzero(flagged))


def make_mesh(positions, triangles, uv_coords, triangle_uvs,
              ignored_directives=0):
    """Validate raw arrays and build a Mesh (degenerate faces dropped with a
    counted warning, normals derived)."""
    positions = np.ascontiguousarray(positions, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int32)
    uv_coords = np.ascontiguousarray(uv_coords, dtype=np.float64)
    triangle_uvs = np.ascontiguousarray(triangle_uvs, dtype=np.int32)

    if positions.ndim != 2 or positions.shape[1] != 3:
        raise MeshValidationError("positions must be (N, 3)")
    if uv_coords.ndim != 2 or uv_coords.shape[1] != 2:
        raise MeshValidationError("uv_coords must be (M, 2)")
    if triangles.shape != triangle_uvs.shape or (triangles.ndim, triangles.shape[1:]) != (2, (3,)):
        raise MeshValidationError("triangles and triangle_uvs must both be (F, 3)")
    if triangles.size and (triangles.min() < 0 or triangles.max() >= len(positions)):
        raise MeshValidationError("triangle index out of range")
    if triangle_uvs.size and (triangle_uvs.min() < 0 or triangle_uvs.max() >= len(uv_coords)):
        raise MeshValidationError("triangle uv index out of range")
    if uv_coords.size and (uv_coords.min() < -1e-9 or uv_coords.max() > 1 + 1e-9):
        raise MeshValidationError("uv coordinates outside [0,1]^2")

    dropped = 0
    if triangles.shape[0]:
        areas = triangle_areas(positions, triangles)
        keep = areas > DEGENERATE_AREA
        dropped = int(np.count_nonzero(~keep))
        if dropped:
            warnings.warn(f"dropped {dropped} degenerate triangle(s)",
                          TexRewardWarning, stacklevel=2)
            triangles = triangles[keep]
            triangle_uvs = triangle_uvs[keep]

    normals, flagged = compute_vertex_normals(positions, triangles)
    diag = MeshDiagnostics(dropped_degenerate=dropped,
                           ignored_directives=ignored_directives,
                           zero_normal_vertices=flagged)
    return Mesh(
        positions=_freeze(positions),
        triangles=_freeze(np.ascontiguousarray(triangles)),
        uv_coords=_freeze(uv_coords),
        triangle_uvs=_freeze(np.ascontiguousarray(triangle_uvs)),
        vertex_normals=_freeze(normals),
        diagnostics=diag,
    )


def parse_obj(data, flip_v=False):
    """Parse a Wavefront OBJ subset: ``v``, ``vt``, triangular ``f`` with
    ``v/vt`` or ``v/vt/vn`` corners.

    ``vn`` entries are ignored (normals are always recomputed). Unknown
    directives are skipped with one counted warning. 1-based indices become
    0-based; parse order is preserved.

    Args:
        data: OBJ text as str or bytes.
        flip_v: replace every ``vt`` v with ``1 - v`` (escape hatch for
            assets authored with the opposite v-axis convention).

    Raises:
        ObjParseError / MissingUVError / UnsupportedFaceError with the
        offending 1-based line number.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")

    positions = []
    uvs = []
    tris = []
    tri_uvs = []
    ignored = 0

    for lineno, raw in enumerate(data.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) != 4:
                raise ObjParseError("'v' must have exactly 3 coordinates", lineno)
            try:
                positions.append([float(x) for x in parts[1:]])
            except ValueError:
                raise ObjParseError("bad float in 'v'", lineno) from None
        elif tag == "vt":
            if len(parts) != 3:
                raise ObjParseError("'vt' must have exactly 2 coordinates", lineno)
            try:
                uvs.append([float(x) for x in parts[1:]])
            except ValueError:
                raise ObjParseError("bad float in 'vt'", lineno) from None
        elif tag == "f":
            corners = parts[1:]
            if len(corners) != 3:
                raise UnsupportedFaceError(
                    f"face with {len(corners)} corners (triangles only)", lineno)
            vi = []
            ti = []
            for corner in corners:
                fields = corner.split("/")
                if len(fields) < 2 or not fields[1]:
                    raise MissingUVError(
                        f"corner '{corner}' lacks a vt index", lineno)
                if len(fields) > 3:
                    raise ObjParseError(f"malformed corner '{corner}'", lineno)
                try:
                    v_idx = int(fields[0])
                    t_idx = int(fields[1])
                except ValueError:
                    raise ObjParseError(f"malformed corner '{corner}'", lineno) from None
                if v_idx <= 0 or t_idx <= 0:
                    raise ObjParseError(
                        "indices must be positive (relative indices unsupported)", lineno)
                vi.append(v_idx - 1)
                ti.append(t_idx - 1)
            tris.append(vi)
            tri_uvs.append(ti)
        else:
            ignored += 1

    if ignored:
        warnings.warn(f"ignored {ignored} unsupported OBJ directive(s)",
                      TexRewardWarning, stacklevel=2)

    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    uvs = np.asarray(uvs, dtype=np.float64).reshape(-1, 2)
    tris = np.asarray(tris, dtype=np.int32).reshape(-1, 3)
    tri_uvs = np.asarray(tri_uvs, dtype=np.int32).reshape(-1, 3)
    if tris.size and (tris.max() >= len(positions) or (tri_uvs.max() >= len(uvs))):
        raise ObjParseError("face references a vertex or vt that was never declared")
    if flip_v and uvs.size:
        uvs = uvs.copy()
        uvs[:, 1] = 1.0 - uvs[:, 1]
    return make_mesh(positions, tris, uvs, tri_uvs, ignored_directives=ignored)


def write_obj(mesh):
    """Serialize to OBJ text with 9 significant digits; parse(write_obj(m))
    round-trips such values bit-exactly."""
    lines = []
    for p in mesh.positions:
        lines.append(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}")
    for t in mesh.uv_coords:
        lines.append(f"vt {t[0]:.9g} {t[1]:.9g}")
    for tri, uvt in zip(mesh.triangles, mesh.triangle_uvs):
        lines.append("f " + " ".join(f"{v + 1}/{t + 1}" for v, t in zip(tri, uvt)))
    return "\n".join(lines) + "\n"


def load_obj(path, flip_v=False):
    with open(path, "rb") as fh:
        return parse_obj(fh.read(), flip_v=flip_v)


def build_adjacency(mesh):
    """Build per-vertex incidence maps (faces, one-ring, owned uv indices).

    Isolated vertices get empty entries. Face lists ascend; one-rings are
    sorted; uv indices keep first-appearance order so "the first uv index of
    a vertex" is well defined.
    """
    n = mesh.num_vertices
    v2f = [[] for _ in range(n)]
    ring = [set() for _ in range(n)]
    v2uv = [[] for _ in range(n)]
    seen_uv = [set() for _ in range(n)]

    for f_idx, (tri, uvt) in enumerate(zip(mesh.triangles, mesh.triangle_uvs)):
        i, j, k = (int(x) for x in tri)
        for v in (i, j, k):
            v2f[v].append(f_idx)
        ring[i].update((j, k))
        ring[j].update((i, k))
        ring[k].update((i, j))
        for v, t in zip((i, j, k), (int(x) for x in uvt)):
            if t not in seen_uv[v]:
                seen_uv[v].add(t)
                v2uv[v].append(t)

    return Adjacency(
        vertex_to_faces=tuple(tuple(f) for f in v2f),
        vertex_one_ring=tuple(tuple(sorted(r)) for r in ring),
        vertex_to_uv_indices=tuple(tuple(u) for u in v2uv),
    )
