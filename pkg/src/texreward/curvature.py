"""Per-vertex principal curvatures and directions via local quadric fitting,
plus the scalar-field normalization used before baking curvature maps.

At each vertex the neighbors within a few topological rings are expressed in
the local tangent frame and a height quadric z = a x^2 + b xy + c y^2 is fit
by least squares; principal curvatures/directions come from the eigensystem of
the shape operator -[[2a, b], [b, 2c]]. With outward normals a convex region
(sphere) gets positive curvature. Principal directions are only defined up to
sign; every consumer must be sign-invariant.
"""

from dataclasses import dataclass

import numpy as np

from .mesh import build_adjacency


@dataclass(frozen=True)
class CurvatureData:
    """Per-vertex curvature: k_min <= k_max, unit tangent directions (sign
    ambiguous), mean_h = (k_min + k_max) / 2, and a validity record."""

    k_min: np.ndarray
    k_max: np.ndarray
    dir_min: np.ndarray
    dir_max: np.ndarray
    mean_h: np.ndarray
    valid: np.ndarray
    infilled: tuple = ()


def tangent_basis(normal):
    """Orthonormal (e1, e2) spanning the plane orthogonal to ``normal``."""
    axis = np.zeros(3)
    axis[np.argmin(np.abs(normal))] = 1.0
    e1 = axis - np.dot(axis, normal) * normal
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    return e1, e2


def _ring_neighborhood(adjacency, vertex, rings):
    seen = {vertex}
    frontier = [vertex]
    out = []
    for _ in range(rings):
        nxt = []
        for v in frontier:
            for w in adjacency.vertex_one_ring[v]:
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        out.extend(nxt)
        frontier = nxt
    return out


def principal_curvatures(mesh, radius_rings=3, adjacency=None):
    """Fit per-vertex principal curvatures/directions.

    Vertices with fewer than 6 usable neighbors (or a flagged zero normal) are
    marked invalid and in-filled afterwards by repeated one-ring averaging;
    the ids that needed in-filling are reported in ``infilled``.

    Args:
        mesh: validated mesh with derived normals.
        radius_rings: how many topological rings feed each fit (>= 2).
    """
    if radius_rings < 2:
        raise ValueError("radius_rings must be >= 2")
    if adjacency is None:
        adjacency = build_adjacency(mesh)

    n = mesh.num_vertices
    k_min = np.zeros(n)
    k_max = np.zeros(n)
    dir_min = np.zeros((n, 3))
    dir_max = np.zeros((n, 3))
    valid = np.zeros(n, dtype=bool)

    for v in range(n):
        normal = mesh.vertex_normals[v]
        if np.linalg.norm(normal) < 0.5:
            continue
        neigh = _ring_neighborhood(adjacency, v, radius_rings)
        if len(neigh) < 6:
            continue
        e1, e2 = tangent_basis(normal)
        d = mesh.positions[neigh] - mesh.positions[v]
        x = d @ e1
        y = d @ e2
        z = d @ normal
        design = np.stack([x * x, x * y, y * y], axis=1)
        coeff, _, rank, _ = np.linalg.lstsq(design, z, rcond=None)
        if rank < 3:
            continue
        a, b, c = coeff
        shape_op = -np.array([[2.0 * a, b], [b, 2.0 * c]])
        evals, evecs = np.linalg.eigh(shape_op)
        k_min[v], k_max[v] = evals
        dir_min[v] = evecs[0, 0] * e1 + evecs[1, 0] * e2
        dir_max[v] = evecs[0, 1] * e1 + evecs[1, 1] * e2
        valid[v] = True

    infilled = _infill_invalid(mesh, adjacency, k_min, k_max,
                               dir_min, dir_max, valid)
    mean_h = 0.5 * (k_min + k_max)
    for arr in (k_min, k_max, dir_min, dir_max, mean_h, valid):
        arr.flags.writeable = False
    return CurvatureData(k_min=k_min, k_max=k_max, dir_min=dir_min,
                         dir_max=dir_max, mean_h=mean_h, valid=valid,
                         infilled=infilled)


def _infill_invalid(mesh, adjacency, k_min, k_max, dir_min, dir_max, valid):
    """Fill invalid vertices from valid ring neighbors until saturation."""
    infilled = []
    pending = [v for v in range(mesh.num_vertices) if not valid[v]]
    while pending:
        progressed = []
        for v in pending:
            donors = [w for w in adjacency.vertex_one_ring[v] if valid[w]]
            if not donors:
                continue
            k_min[v] = np.mean(k_min[donors])
            k_max[v] = np.mean(k_max[donors])
            dir_min[v] = _sign_aligned_mean(dir_min[donors])
            dir_max[v] = _sign_aligned_mean(dir_max[donors])
            normal = mesh.vertex_normals[v]
            if np.linalg.norm(normal) > 0.5:
                for d in (dir_min, dir_max):
                    t = d[v] - np.dot(d[v], normal) * normal
                    norm = np.linalg.norm(t)
                    if norm > 1e-12:
                        d[v] = t / norm
            progressed.append(v)
        if not progressed:
            break
        for v in progressed:
            valid[v] = True
        infilled.extend(progressed)
        pending = [v for v in pending if not valid[v]]
    return tuple(infilled)


def _sign_aligned_mean(dirs):
    ref = dirs[0]
    flips = np.where(dirs @ ref >= 0.0, 1.0, -1.0)
    m = (dirs * flips[:, None]).mean(axis=0)
    norm = np.linalg.norm(m)
    return m / norm if norm > 1e-12 else ref


def normalize_scalar_field(values, target="unit", clip_percentile=0.02):
    """Percentile-clip then affinely map a scalar field onto [0,1] or [-1,1].

    Clipping is symmetric at [p, 1-p]; the clipped extremes land exactly on
    the range endpoints. A constant input maps to the range midpoint.

    Args:
        target: "unit" for [0,1] or "signed_unit" for [-1,1].
        clip_percentile: fraction p in [0, 0.1].
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("empty scalar field")
    if not 0.0 <= clip_percentile <= 0.1:
        raise ValueError("clip_percentile must be in [0, 0.1]")
    if target not in ("unit", "signed_unit"):
        raise ValueError(f"unknown target range '{target}'")

    lo = np.percentile(values, 100.0 * clip_percentile)
    hi = np.percentile(values, 100.0 * (1.0 - clip_percentile))
    if hi - lo < 1e-300:
        mid = 0.5 if target == "unit" else 0.0
        return np.full_like(values, mid)
    t = (np.clip(values, lo, hi) - lo) / (hi - lo)
    return t if target == "unit" else 2.0 * t - 1.0
