import numpy as np
import pytest

from texreward import procedural
from texreward.baking import (
    bake_vertex_scalar,
    barycentric_coords,
    load_scalar_map,
    save_scalar_map,
    texel_centers_uv,
    vertex_uv_texels,
)
from texreward.errors import DegenerateTriangleError
from texreward.mesh import build_adjacency, make_mesh

RIGHT_TRI = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def brute_force_coverage(mesh, width, height):
    """Independent per-texel scan over every UV triangle."""
    centers = texel_centers_uv(width, height).reshape(-1, 2)
    counts = np.zeros(len(centers), dtype=np.int64)
    for uvt in mesh.triangle_uvs:
        tri = mesh.uv_coords[uvt]
        area2 = ((tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1])
                 - (tri[1, 1] - tri[0, 1]) * (tri[2, 0] - tri[0, 0]))
        if abs(area2) < 2e-12:
            continue
        bary = barycentric_coords(centers, tri)
        counts += (bary >= -1e-9).all(axis=1)
    return counts.reshape(height, width)


def full_square_mesh():
    """Two triangles covering all of [0,1]^2 in UV."""
    pos = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]
    uv = [[0, 0], [1, 0], [1, 1], [0, 1]]
    tris = [[0, 1, 2], [0, 2, 3]]
    return make_mesh(pos, tris, uv, tris)


def test_barycentric_centroid():
    np.testing.assert_allclose(
        barycentric_coords(RIGHT_TRI.mean(axis=0), RIGHT_TRI),
        [1 / 3, 1 / 3, 1 / 3], atol=1e-12)


def test_barycentric_vertex():
    np.testing.assert_allclose(barycentric_coords([0.0, 0.0], RIGHT_TRI),
                               [1, 0, 0], atol=1e-12)


def test_barycentric_hand_solved():
    np.testing.assert_allclose(barycentric_coords([0.25, 0.25], RIGHT_TRI),
                               [0.5, 0.25, 0.25], atol=1e-12)


def test_barycentric_partition_and_reconstruction(rng):
    tri = rng.uniform(-3, 3, size=(3, 2))
    pts = rng.uniform(-3, 3, size=(50, 2))
    bary = barycentric_coords(pts, tri)
    np.testing.assert_allclose(bary.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(bary @ tri, pts, atol=1e-9)


def test_barycentric_degenerate_raises():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(DegenerateTriangleError):
        barycentric_coords([0.5, 0.5], tri)


def test_bake_constant_field():
    mesh = full_square_mesh()
    smap = bake_vertex_scalar(mesh, np.full(4, 0.73), 16, 16)
    assert smap.covered.all()
    np.testing.assert_allclose(smap.values[smap.covered], 0.73, atol=1e-12)


def test_bake_boundary_midpoint():
    # single UV triangle ((0,0),(1,0),(0,1)) with values (0,1,0); the texel
    # center at uv=(0.5, 0) is the boundary edge midpoint -> 0.5
    pos = [[0, 0, 0], [1, 0, 0], [0, 1, 0]]
    uv = [[0, 0], [1, 0], [0, 1]]
    mesh = make_mesh(pos, [[0, 1, 2]], uv, [[0, 1, 2]])
    w = h = 5  # texel grid hits u=0.5 exactly at column 2
    smap = bake_vertex_scalar(mesh, np.array([0.0, 1.0, 0.0]), w, h)
    row, col = h - 1, 2
    assert smap.coverage[row, col] > 0
    assert abs(smap.values[row, col] - 0.5) < 1e-6


def test_bake_overlapping_triangles_average():
    pos = [[0, 0, 0], [1, 0, 0], [0, 1, 0]]
    uv = [[0, 0], [1, 0], [0, 1]]
    tris = [[0, 1, 2], [0, 1, 2]]
    mesh = make_mesh(pos, tris, uv, tris)
    smap = bake_vertex_scalar(mesh, np.array([0.2, 0.2, 0.2]), 8, 8)
    assert smap.coverage[smap.covered].max() == 2
    np.testing.assert_allclose(smap.values[smap.covered], 0.2, atol=1e-12)


def test_bake_uncovered_fill_zero():
    pos = [[0, 0, 0], [1, 0, 0], [0, 1, 0]]
    uv = [[0, 0], [0.4, 0], [0, 0.4]]
    mesh = make_mesh(pos, [[0, 1, 2]], uv, [[0, 1, 2]])
    smap = bake_vertex_scalar(mesh, np.ones(3), 16, 16)
    assert (smap.values[~smap.covered] == 0).all()
    assert smap.coverage[0, 15] == 0


def test_bake_linearity(icosphere3, rng):
    x = rng.normal(size=icosphere3.num_vertices)
    y = rng.normal(size=icosphere3.num_vertices)
    a, b = 0.7, -1.3
    m1 = bake_vertex_scalar(icosphere3, a * x + b * y, 32, 32)
    m2 = bake_vertex_scalar(icosphere3, x, 32, 32)
    m3 = bake_vertex_scalar(icosphere3, y, 32, 32)
    cov = m1.covered
    np.testing.assert_allclose(m1.values[cov],
                               (a * m2.values + b * m3.values)[cov],
                               atol=1e-9)


def test_bake_triangle_order_invariance(icosphere3, rng):
    x = rng.normal(size=icosphere3.num_vertices)
    perm = rng.permutation(icosphere3.num_triangles)
    shuffled = make_mesh(icosphere3.positions, icosphere3.triangles[perm],
                         icosphere3.uv_coords, icosphere3.triangle_uvs[perm])
    m1 = bake_vertex_scalar(icosphere3, x, 24, 24)
    m2 = bake_vertex_scalar(shuffled, x, 24, 24)
    assert np.array_equal(m1.values, m2.values)
    assert np.array_equal(m1.coverage, m2.coverage)


def test_bake_coverage_matches_brute_force(icosphere3, rng):
    x = rng.normal(size=icosphere3.num_vertices)
    smap = bake_vertex_scalar(icosphere3, x, 24, 24)
    np.testing.assert_array_equal(smap.coverage,
                                  brute_force_coverage(icosphere3, 24, 24))


def test_bake_skips_degenerate_uv_triangle():
    pos = [[0, 0, 0], [1, 0, 0], [0, 1, 0]]
    uv = [[0.2, 0.2], [0.5, 0.2], [0.8, 0.2]]  # collinear in UV only
    pos2 = [[0, 0, 1], [1, 0, 1], [0, 1, 1]]
    mesh = make_mesh(pos + pos2, [[0, 1, 2], [3, 4, 5]],
                     uv + [[0, 0], [1, 0], [0, 1]],
                     [[0, 1, 2], [3, 4, 5]])
    smap = bake_vertex_scalar(mesh, np.ones(6), 8, 8)
    assert smap.skipped_triangles == 1
    assert smap.covered.any()


def test_vertex_uv_texels_seam():
    pos = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]]
    uv = [[0.1, 0.1], [0.4, 0.1], [0.1, 0.4], [0.9, 0.1], [0.9, 0.4]]
    tris = [[0, 1, 2], [1, 3, 2]]
    tri_uvs = [[0, 1, 2], [3, 4, 2]]
    mesh = make_mesh(pos, tris, uv, tri_uvs)
    entries = vertex_uv_texels(mesh, 10, 10)
    assert len(entries[1]) == 2
    assert len(entries[0]) == 1
    (uv0, texel0) = entries[0][0]
    assert texel0 == (8, 1)  # row=(9*(1-0.1))=8.1 -> 8, col=0.1*9=0.9 -> 1


def test_vertex_uv_texels_counts_match_adjacency(icosphere3, icosphere3_adj):
    entries = vertex_uv_texels(icosphere3, 64, 64, adjacency=icosphere3_adj)
    for v, uv_ids in enumerate(icosphere3_adj.vertex_to_uv_indices):
        assert len(entries[v]) == len(uv_ids)


def test_scalar_map_roundtrip(tmp_path, icosphere3, rng):
    x = rng.normal(size=icosphere3.num_vertices)
    smap = bake_vertex_scalar(icosphere3, x, 16, 16, range_tag="raw")
    base = str(tmp_path / "curv")
    save_scalar_map(smap, base)
    loaded = load_scalar_map(base)
    assert loaded.width == 16 and loaded.height == 16
    np.testing.assert_allclose(loaded.values, smap.values, atol=1e-6)
    np.testing.assert_array_equal(loaded.coverage, smap.coverage)
    assert loaded.range_tag == "raw"


def test_dilate_once_fills_border_ring():
    from texreward.baking import dilate_once
    pos = [[0, 0, 0], [1, 0, 0], [0, 1, 0]]
    uv = [[0.2, 0.2], [0.8, 0.2], [0.2, 0.8]]
    mesh = make_mesh(pos, [[0, 1, 2]], uv, [[0, 1, 2]])
    smap = bake_vertex_scalar(mesh, np.full(3, 0.6), 16, 16)
    grown = dilate_once(smap)
    # coverage unchanged, strictly more nonzero texels, covered values intact
    np.testing.assert_array_equal(grown.coverage, smap.coverage)
    np.testing.assert_array_equal(grown.values[smap.covered],
                                  smap.values[smap.covered])
    assert (grown.values != 0).sum() > (smap.values != 0).sum()
    filled = (grown.values != 0) & ~smap.covered
    np.testing.assert_allclose(grown.values[filled], 0.6, atol=1e-12)
