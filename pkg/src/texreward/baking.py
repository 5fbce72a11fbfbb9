"""Barycentric utilities and UV-space baking of per-vertex scalars.

Texels are addressed with the package-wide convention
``col = u * (W-1)``, ``row = (1-v) * (H-1)`` (row 0 on top); a texel belongs
to a UV triangle iff its center passes the inside test with tolerance
beta >= -1e-9. Contributions from overlapping triangles are accumulated and
averaged per texel, with a sorted reduction so the result is bit-identical
under any triangle reordering.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTriangleError

INSIDE_TOL = 1e-9


@dataclass(frozen=True)
class ScalarMap:
    """Dense UV raster of one scalar channel plus its contribution counts.

    ``range_tag`` is "unit" ([0,1]), "signed_unit" ([-1,1]) or "raw".
    Uncovered texels hold the fill value 0 with coverage 0.
    """

    width: int
    height: int
    values: np.ndarray
    coverage: np.ndarray
    range_tag: str = "raw"
    skipped_triangles: int = 0

    @property
    def covered(self):
        return self.coverage > 0


def barycentric_coords(p, tri):
    """Barycentric coordinates of 2D point(s) ``p`` in triangle ``tri``.

    Args:
        p: (2,) point or (K, 2) batch.
        tri: (3, 2) triangle corners (a, b, c).

    Returns:
        (3,) or (K, 3) weights summing to 1; all >= -1e-9 iff inside.

    Raises:
        DegenerateTriangleError: if the triangle area is (near) zero.
    """
    tri = np.asarray(tri, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    a, b, c = tri
    ab = b - a
    ac = c - a
    denom = ab[0] * ac[1] - ab[1] * ac[0]
    if abs(denom) < 2e-12:
        raise DegenerateTriangleError("zero-area UV triangle")
    ap = p - a
    beta2 = (ap[..., 0] * ac[1] - ap[..., 1] * ac[0]) / denom
    beta3 = (ab[0] * ap[..., 1] - ab[1] * ap[..., 0]) / denom
    beta1 = 1.0 - beta2 - beta3
    return np.stack([beta1, beta2, beta3], axis=-1)


def texel_centers_uv(width, height):
    """(H, W, 2) uv coordinates of every texel center."""
    cols = np.arange(width) / (width - 1)
    rows = 1.0 - np.arange(height) / (height - 1)
    u, v = np.meshgrid(cols, rows, indexing="xy")
    return np.stack([u, v], axis=-1)


def _triangle_texel_hits(uv_tri, width, height):
    """Texel centers covered by one UV triangle: (flat_idx, bary) arrays."""
    a, b, c = uv_tri
    area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if abs(area2) < 2e-12:
        return None
    u_min, u_max = uv_tri[:, 0].min(), uv_tri[:, 0].max()
    v_min, v_max = uv_tri[:, 1].min(), uv_tri[:, 1].max()
    col_lo = max(0, int(np.ceil(u_min * (width - 1) - 1e-6)))
    col_hi = min(width - 1, int(np.floor(u_max * (width - 1) + 1e-6)))
    row_lo = max(0, int(np.ceil((1.0 - v_max) * (height - 1) - 1e-6)))
    row_hi = min(height - 1, int(np.floor((1.0 - v_min) * (height - 1) + 1e-6)))
    if col_lo > col_hi or row_lo > row_hi:
        return None
    cols = np.arange(col_lo, col_hi + 1)
    rows = np.arange(row_lo, row_hi + 1)
    u = cols / (width - 1)
    v = 1.0 - rows / (height - 1)
    uu, vv = np.meshgrid(u, v, indexing="xy")
    pts = np.stack([uu.ravel(), vv.ravel()], axis=-1)
    bary = barycentric_coords(pts, uv_tri)
    inside = (bary >= -INSIDE_TOL).all(axis=1)
    if not inside.any():
        return None
    cc, rr = np.meshgrid(cols, rows, indexing="xy")
    flat = (rr.ravel() * width + cc.ravel())[inside]
    return flat, bary[inside]


def bake_vertex_scalar(mesh, values, width, height, range_tag="raw"):
    """Bake per-vertex scalars into a (height, width) ScalarMap.

    Every texel center inside a UV triangle receives the barycentric
    interpolation of the triangle's three vertex values; overlaps are summed
    and divided by the contribution count. Zero-area UV triangles are skipped
    and counted in ``skipped_triangles`` on the returned map.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != mesh.num_vertices:
        raise ValueError("one scalar per mesh vertex required")
    if width < 4 or height < 4:
        raise ValueError("bake size must be at least 4x4")

    flat_all = []
    val_all = []
    skipped = 0
    for tri, uvt in zip(mesh.triangles, mesh.triangle_uvs):
        uv_tri = mesh.uv_coords[uvt]
        a, b, c = uv_tri
        area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(area2) < 2e-12:
            skipped += 1
            continue
        hits = _triangle_texel_hits(uv_tri, width, height)
        if hits is None:
            continue
        flat, bary = hits
        flat_all.append(flat)
        val_all.append(bary @ values[tri])

    acc = np.zeros(height * width)
    cnt = np.zeros(height * width, dtype=np.int64)
    if flat_all:
        flat = np.concatenate(flat_all)
        val = np.concatenate(val_all)
        order = np.lexsort((val, flat))
        flat = flat[order]
        val = val[order]
        starts = np.flatnonzero(np.r_[True, flat[1:] != flat[:-1]])
        acc[flat[starts]] = np.add.reduceat(val, starts)
        cnt += np.bincount(flat, minlength=height * width)

    covered = cnt > 0
    out = np.zeros(height * width)
    out[covered] = acc[covered] / cnt[covered]
    if range_tag == "unit":
        out[covered] = np.clip(out[covered], 0.0, 1.0)
    elif range_tag == "signed_unit":
        out[covered] = np.clip(out[covered], -1.0, 1.0)
    values_2d = out.reshape(height, width)
    coverage_2d = cnt.reshape(height, width)
    values_2d.flags.writeable = False
    coverage_2d.flags.writeable = False
    return ScalarMap(width=width, height=height, values=values_2d,
                     coverage=coverage_2d, range_tag=range_tag,
                     skipped_triangles=skipped)


def dilate_once(smap):
    """Optional 1-texel dilation for visualization: uncovered texels take the
    mean of covered 8-neighbors. Coverage is unchanged (still marks the true
    rasterized union)."""
    vals = smap.values.copy()
    cov = smap.covered
    padded_v = np.pad(smap.values, 1)
    padded_c = np.pad(cov.astype(np.float64), 1)
    acc = np.zeros_like(vals)
    cnt = np.zeros_like(vals)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            acc += (padded_v * padded_c)[1 + dr:1 + dr + smap.height,
                                         1 + dc:1 + dc + smap.width]
            cnt += padded_c[1 + dr:1 + dr + smap.height,
                            1 + dc:1 + dc + smap.width]
    fill = (~cov) & (cnt > 0)
    vals[fill] = acc[fill] / cnt[fill]
    return ScalarMap(width=smap.width, height=smap.height, values=vals,
                     coverage=smap.coverage, range_tag=smap.range_tag)


def vertex_uv_texels(mesh, width, height, adjacency=None):
    """Per-vertex list of (uv point, nearest texel) entries, one per distinct
    uv index the vertex owns (seam vertices get several)."""
    from .mesh import build_adjacency
    if adjacency is None:
        adjacency = build_adjacency(mesh)
    out = []
    for uv_ids in adjacency.vertex_to_uv_indices:
        entries = []
        for t in uv_ids:
            u, v = mesh.uv_coords[t]
            col = min(width - 1, max(0, int(np.floor(u * (width - 1) + 0.5))))
            row = min(height - 1, max(0, int(np.floor((1.0 - v) * (height - 1) + 0.5))))
            entries.append(((float(u), float(v)), (row, col)))
        out.append(tuple(entries))
    return tuple(out)


def _format_float(x):
    return float(f"{x:.9g}")


def save_scalar_map(smap, base_path):
    """Export raw float32 (row-major from the top row) + JSON sidecar + 8-bit
    PNG preview, and the coverage counts as a parallel raw/json pair."""
    from PIL import Image

    raw_path = f"{base_path}.raw"
    smap.values.astype("<f4").tofile(raw_path)
    sidecar = {"width": smap.width, "height": smap.height, "channels": 1,
               "range": smap.range_tag}
    with open(f"{base_path}.json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")

    cov_path = f"{base_path}.coverage"
    smap.coverage.astype("<f4").tofile(f"{cov_path}.raw")
    with open(f"{cov_path}.json", "w") as fh:
        json.dump({"width": smap.width, "height": smap.height, "channels": 1,
                   "range": "raw"}, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if smap.range_tag == "unit":
        scaled = smap.values
    elif smap.range_tag == "signed_unit":
        scaled = (smap.values + 1.0) / 2.0
    else:
        lo, hi = smap.values.min(), smap.values.max()
        scaled = (smap.values - lo) / (hi - lo) if hi > lo else np.zeros_like(smap.values)
    img = np.floor(scaled * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(img, mode="L").save(f"{base_path}.png")
    return [raw_path, f"{base_path}.json", f"{cov_path}.raw",
            f"{cov_path}.json", f"{base_path}.png"]


def load_scalar_map(base_path):
    """Inverse of save_scalar_map (PNG preview ignored; coverage read if
    present, else everything counts as covered once)."""
    with open(f"{base_path}.json") as fh:
        meta = json.load(fh)
    w, h = meta["width"], meta["height"]
    values = np.fromfile(f"{base_path}.raw", dtype="<f4").astype(np.float64)
    values = values.reshape(h, w)
    try:
        coverage = np.fromfile(f"{base_path}.coverage.raw", dtype="<f4")
        coverage = coverage.astype(np.int64).reshape(h, w)
    except FileNotFoundError:
        coverage = np.ones((h, w), dtype=np.int64)
    return ScalarMap(width=w, height=h, values=values, coverage=coverage,
                     range_tag=meta.get("range", "raw"))
