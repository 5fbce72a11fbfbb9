"""Procedural UV-mapped meshes used by the test suite and the demo docs:
planar grids, icospheres with a spherical atlas, open cylinders, and an
exactly mirror-symmetric wavy sheet.
"""

import numpy as np

from .mesh import make_mesh


def make_grid(nx=8, ny=8, xs=None, ys=None, height_fn=None, uv_transform=None):
    """Planar (or height-field) grid of (nx * ny) vertices, triangulated.

    Args:
        xs, ys: explicit coordinate arrays (override nx/ny spans in [0,1]).
        height_fn: optional z = f(x, y) applied vertexwise.
        uv_transform: optional 2x3 affine [[a,b,tx],[c,d,ty]] mapping (x, y)
            to uv; defaults to normalizing the grid span onto [0,1]^2.
    """
    xs = np.linspace(0.0, 1.0, nx) if xs is None else np.asarray(xs, dtype=np.float64)
    ys = np.linspace(0.0, 1.0, ny) if ys is None else np.asarray(ys, dtype=np.float64)
    nx, ny = len(xs), len(ys)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    gz = height_fn(gx, gy) if height_fn is not None else np.zeros_like(gx)
    positions = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    if uv_transform is None:
        span_x = xs[-1] - xs[0] or 1.0
        span_y = ys[-1] - ys[0] or 1.0
        uv = np.stack([(gx.ravel() - xs[0]) / span_x,
                       (gy.ravel() - ys[0]) / span_y], axis=1)
    else:
        m = np.asarray(uv_transform, dtype=np.float64)
        uv = positions[:, :2] @ m[:, :2].T + m[:, 2]

    tris = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a = i * ny + j
            b = (i + 1) * ny + j
            c = (i + 1) * ny + j + 1
            d = i * ny + j + 1
            tris.append([a, b, c])
            tris.append([a, c, d])
    tris = np.asarray(tris, dtype=np.int32)
    return make_mesh(positions, tris, uv, tris.copy())


def _icosahedron():
    t = (1.0 + 5.0 ** 0.5) / 2.0
    verts = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=np.float64)
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    return verts, faces


def icosphere_vertices(subdivisions=3, radius=1.0):
    """Raw icosphere geometry (verts, faces) before any UV assignment."""
    verts, faces = _icosahedron()
    vert_list = [v for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            if key in cache:
                return cache[key]
            m = (vert_list[i] + vert_list[j]) * 0.5
            m = m / np.linalg.norm(m)
            vert_list.append(m)
            cache[key] = len(vert_list) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = np.asarray(new_faces, dtype=np.int64)
    return np.asarray(vert_list) * radius, faces


def make_icosphere(subdivisions=3, radius=1.0, scale=(1.0, 1.0, 1.0)):
    """Icosphere with a spherical (longitude/latitude) atlas.

    Seam triangles that wrap in longitude get shifted duplicate uv entries,
    and pole corners get per-triangle uv entries, so seam vertices own
    multiple uv indices. The whole atlas is compressed into [0,1]^2.
    """
    verts, faces = icosphere_vertices(subdivisions, radius)
    unit = verts / np.linalg.norm(verts, axis=1)[:, None]
    base_u = 0.5 + np.arctan2(unit[:, 0], unit[:, 2]) / (2.0 * np.pi)
    base_v = 0.5 + np.arcsin(np.clip(unit[:, 1], -1.0, 1.0)) / np.pi
    pole = np.abs(unit[:, 1]) > 1.0 - 1e-9

    uv_list = []
    uv_key = {}

    def uv_index(vid, u, v):
        key = (vid, round(u, 9), round(v, 9))
        if key not in uv_key:
            uv_key[key] = len(uv_list)
            uv_list.append([u, v])
        return uv_key[key]

    tri_uvs = np.zeros_like(faces)
    for f_idx, tri in enumerate(faces):
        us = base_u[tri].copy()
        non_pole = ~pole[tri]
        span = us[non_pole]
        if span.size >= 2 and span.max() - span.min() > 0.5:
            us[(us < 0.5) & non_pole] += 1.0
        if pole[tri].any() and non_pole.any():
            us[pole[tri]] = us[non_pole].mean()
        for k in range(3):
            vid = int(tri[k])
            tri_uvs[f_idx, k] = uv_index(vid, us[k] / 1.5, base_v[vid])

    positions = verts * np.asarray(scale, dtype=np.float64)
    return make_mesh(positions, faces, np.asarray(uv_list), tri_uvs)


def make_cylinder(n_theta=48, n_z=17, radius=0.5, height=2.0):
    """Open tube around the z axis with a wrap seam in u (duplicated vt)."""
    thetas = 2.0 * np.pi * np.arange(n_theta) / n_theta
    zs = np.linspace(-height / 2.0, height / 2.0, n_z)
    positions = []
    for z in zs:
        for th in thetas:
            positions.append([radius * np.cos(th), radius * np.sin(th), z])
    positions = np.asarray(positions)

    # one uv column per theta sample plus a duplicate column at u = 1
    uv = []
    for k in range(n_z):
        v = k / (n_z - 1)
        for j in range(n_theta + 1):
            uv.append([j / n_theta, v])
    uv = np.asarray(uv)

    def vid(j, k):
        return k * n_theta + (j % n_theta)

    def tid(j, k):
        return k * (n_theta + 1) + j

    tris, tri_uvs = [], []
    for k in range(n_z - 1):
        for j in range(n_theta):
            a, b = vid(j, k), vid(j + 1, k)
            c, d = vid(j + 1, k + 1), vid(j, k + 1)
            ta, tb = tid(j, k), tid(j + 1, k)
            tc, td = tid(j + 1, k + 1), tid(j, k + 1)
            tris.append([a, b, c])
            tri_uvs.append([ta, tb, tc])
            tris.append([a, c, d])
            tri_uvs.append([ta, tc, td])
    return make_mesh(positions, np.asarray(tris, dtype=np.int32), uv,
                     np.asarray(tri_uvs, dtype=np.int32))


def make_mirrored_sheet(nx=10, ny=9, half_width=0.4):
    """Wavy open sheet exactly mirror-symmetric about the x = 0 plane.

    x samples come in exact +/- pairs (no x = 0 column), z depends on x only
    through x^2, and the injective atlas u = affine(x) makes the mirror map in
    UV space the reflection u -> 1 - u. The x extent is narrow and the wave
    tall so the PCA least-variance axis is x.
    """
    half = np.linspace(half_width / nx, half_width, nx // 2)
    xs = np.concatenate([-half[::-1], half])
    ys = np.linspace(-1.0, 1.0, ny)

    def wave(x, y):
        return 0.8 * np.cos(np.pi * y / 2.0) + 0.1 * x * x

    span = xs[-1] - xs[0]
    uvt = np.array([[1.0 / span, 0.0, -xs[0] / span],
                    [0.0, 0.5, 0.5]])
    return make_grid(xs=xs, ys=ys, height_fn=wave, uv_transform=uvt)
