"""Mirror-symmetry geometry: PCA plane estimation, vertex reflection,
closest-point queries (brute force and an AABB tree with an exact-match
contract against brute force), and mirror UV pair construction.
"""

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SymmetryPlane:
    """Plane through ``centroid`` with unit ``normal`` (least-variance PCA
    axis, sign fixed so the largest-|component| coordinate is positive).
    ``warnings`` carries the ambiguity note when the two smallest eigenvalues
    nearly tie."""

    centroid: np.ndarray
    normal: np.ndarray
    eigenvalues: tuple
    warnings: tuple = ()


@dataclass(frozen=True)
class MirrorPairSet:
    """UV pairs related by the symmetry plane: ``uv`` on the positive side,
    ``uv_mirror`` from projecting the reflected vertex back onto the mesh,
    ``residual`` the reflection-to-surface distance. ``rejected`` counts the
    pairs dropped by the residual filter."""

    uv: np.ndarray
    uv_mirror: np.ndarray
    residual: np.ndarray
    rejected: int = 0

    def __len__(self):
        return self.uv.shape[0]


def estimate_symmetry_plane(mesh):
    """PCA symmetry plane of the vertex cloud.

    The covariance is (1/N) sum (v-c)(v-c)^T; the normal is the eigenvector
    of the smallest eigenvalue. A near-isotropic spectrum
    (lambda1/lambda2 > 0.99) attaches an 'ambiguous-plane' warning.
    """
    pts = mesh.positions
    if pts.shape[0] < 4:
        raise ValueError("need at least 4 vertices for a plane estimate")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / pts.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    normal = evecs[:, 0].copy()
    pick = np.argmax(np.abs(normal))
    if normal[pick] < 0:
        normal = -normal
    warn = ()
    if evals[1] > 1e-300 and evals[0] / evals[1] > 0.99:
        warn = ("ambiguous-plane: two smallest variances nearly equal",)
    normal.flags.writeable = False
    centroid.flags.writeable = False
    return SymmetryPlane(centroid=centroid, normal=normal,
                         eigenvalues=tuple(float(x) for x in evals),
                         warnings=warn)


def reflect_point(p, plane):
    """Mirror ``p`` (or a batch (K,3)) across the plane:
    p - 2 [(p - c) . n] n. An involution and an isometry."""
    p = np.asarray(p, dtype=np.float64)
    d = (p - plane.centroid) @ plane.normal
    return p - 2.0 * np.multiply.outer(d, plane.normal)


def signed_distances(mesh, plane):
    return (mesh.positions - plane.centroid) @ plane.normal


def _closest_on_triangles(p, a, b, c):
    """Closest points of ``p`` on a batch of triangles (Ericson's region
    test, vectorized). Returns (points (F,3), bary (F,3), d2 (F,))."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2_ = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    va = d3 * d6 - d5 * d4
    vb = d5 * d2_ - d1 * d6
    vc = d1 * d4 - d3 * d2_

    n = a.shape[0]
    bary = np.zeros((n, 3))
    done = np.zeros(n, dtype=bool)

    # vertex regions
    m = (d1 <= 0) & (d2_ <= 0)
    bary[m] = (1.0, 0.0, 0.0)
    done |= m
    m = (~done) & (d3 >= 0) & (d4 <= d3)
    bary[m] = (0.0, 1.0, 0.0)
    done |= m
    m = (~done) & (d6 >= 0) & (d5 <= d6)
    bary[m] = (0.0, 0.0, 1.0)
    done |= m

    # edge AB
    m = (~done) & (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    denom = np.where(np.abs(d1 - d3) > 0, d1 - d3, 1.0)
    t = d1 / denom
    bary[m, 0] = 1.0 - t[m]
    bary[m, 1] = t[m]
    done |= m

    # edge AC
    m = (~done) & (vb <= 0) & (d2_ >= 0) & (d6 <= 0)
    denom = np.where(np.abs(d2_ - d6) > 0, d2_ - d6, 1.0)
    t = d2_ / denom
    bary[m, 0] = 1.0 - t[m]
    bary[m, 2] = t[m]
    done |= m

    # edge BC
    m = (~done) & (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    denom = (d4 - d3) + (d5 - d6)
    denom = np.where(np.abs(denom) > 0, denom, 1.0)
    t = (d4 - d3) / denom
    bary[m, 1] = 1.0 - t[m]
    bary[m, 2] = t[m]
    done |= m

    # interior
    m = ~done
    denom = va + vb + vc
    denom = np.where(np.abs(denom) > 0, denom, 1.0)
    v = vb / denom
    w = vc / denom
    bary[m, 0] = 1.0 - v[m] - w[m]
    bary[m, 1] = v[m]
    bary[m, 2] = w[m]

    points = bary[:, 0:1] * a + bary[:, 1:2] * b + bary[:, 2:3] * c
    diff = points - p
    return points, bary, np.einsum("ij,ij->i", diff, diff)


def closest_point_brute_force(mesh, p):
    """Scan every triangle; ties broken by lowest face index. The oracle the
    accelerated query must match exactly."""
    t = mesh.triangles
    pts, bary, d2 = _closest_on_triangles(
        np.asarray(p, dtype=np.float64),
        mesh.positions[t[:, 0]], mesh.positions[t[:, 1]],
        mesh.positions[t[:, 2]])
    face = int(np.argmin(d2))  # argmin takes the first (= lowest) index
    return {"face": face, "bary": tuple(float(x) for x in bary[face]),
            "point": pts[face], "distance": float(np.sqrt(d2[face]))}


class AabbTree:
    """Median-split AABB tree over triangles for closest-point queries.

    Traversal prunes only boxes strictly farther than the current best and
    updates the best lexicographically on (squared distance, face index), so
    results match ``closest_point_brute_force`` exactly.
    """

    LEAF_SIZE = 8

    def __init__(self, mesh):
        self.mesh = mesh
        t = mesh.triangles
        self._a = mesh.positions[t[:, 0]]
        self._b = mesh.positions[t[:, 1]]
        self._c = mesh.positions[t[:, 2]]
        tri_pts = np.stack([self._a, self._b, self._c], axis=1)
        self._lo = tri_pts.min(axis=1)
        self._hi = tri_pts.max(axis=1)
        centroids = tri_pts.mean(axis=1)
        self._nodes = []
        order = np.arange(t.shape[0])
        self._root = self._build(order, centroids)

    def _build(self, idx, centroids):
        lo = self._lo[idx].min(axis=0)
        hi = self._hi[idx].max(axis=0)
        node = {"lo": lo, "hi": hi, "faces": None, "left": -1, "right": -1}
        self._nodes.append(node)
        node_id = len(self._nodes) - 1
        if len(idx) <= self.LEAF_SIZE:
            node["faces"] = np.sort(idx)
            return node_id
        axis = int(np.argmax(hi - lo))
        mid = len(idx) // 2
        part = idx[np.argsort(centroids[idx, axis], kind="stable")]
        node["left"] = self._build(part[:mid], centroids)
        node["right"] = self._build(part[mid:], centroids)
        return node_id

    def _box_d2(self, node, p):
        lo, hi = node["lo"], node["hi"]
        d = np.maximum(np.maximum(lo - p, 0.0), p - hi)
        return float(d @ d)

    def query(self, p):
        """Globally nearest surface point, identical to brute force."""
        p = np.asarray(p, dtype=np.float64)
        best = {"d2": np.inf, "face": -1, "bary": None, "point": None}
        stack = [self._root]
        while stack:
            node = self._nodes[stack.pop()]
            if self._box_d2(node, p) > best["d2"]:
                continue
            if node["faces"] is not None:
                idx = node["faces"]
                pts, bary, d2 = _closest_on_triangles(
                    p, self._a[idx], self._b[idx], self._c[idx])
                for k in np.argsort(d2, kind="stable"):
                    f = int(idx[k])
                    if (d2[k] < best["d2"]
                            or (d2[k] == best["d2"] and f < best["face"])):
                        best = {"d2": float(d2[k]), "face": f,
                                "bary": bary[k], "point": pts[k]}
            else:
                children = [node["left"], node["right"]]
                children.sort(key=lambda c: self._box_d2(self._nodes[c], p))
                stack.extend(reversed(children))
        return {"face": best["face"],
                "bary": tuple(float(x) for x in best["bary"]),
                "point": best["point"],
                "distance": float(np.sqrt(best["d2"]))}


def closest_point_on_mesh(mesh, p, tree=None):
    """Nearest point on the mesh surface (accelerated when a tree is given)."""
    if tree is not None:
        return tree.query(p)
    return closest_point_brute_force(mesh, p)


def mirror_pairs(mesh, plane, max_residual=None, tree=None):
    """Build UV pairs for every vertex strictly on the positive side.

    Each positive vertex is reflected, projected to its closest surface
    point, and converted to UV with that triangle's barycentric weights.
    Pairs with residual above ``max_residual`` (default 0.5% of the bounding
    box diagonal) are dropped and counted. The source uv is the vertex's
    first uv index; seam vertices replicate the pair for each extra uv index.
    """
    from .mesh import build_adjacency

    if max_residual is None:
        max_residual = 0.005 * mesh.bounding_box_diagonal()
    if tree is None and mesh.num_triangles > 64:
        tree = AabbTree(mesh)
    adjacency = build_adjacency(mesh)

    d = signed_distances(mesh, plane)
    uv_rows, mirror_rows, residuals = [], [], []
    rejected = 0
    for v in np.flatnonzero(d > 0):
        uv_ids = adjacency.vertex_to_uv_indices[v]
        if not uv_ids:
            continue
        reflected = reflect_point(mesh.positions[v], plane)
        hit = closest_point_on_mesh(mesh, reflected, tree=tree)
        if hit["distance"] > max_residual:
            rejected += 1
            continue
        uv_tri = mesh.uv_coords[mesh.triangle_uvs[hit["face"]]]
        uv_mirror = np.asarray(hit["bary"]) @ uv_tri
        for t in uv_ids:
            uv_rows.append(mesh.uv_coords[t])
            mirror_rows.append(uv_mirror)
            residuals.append(hit["distance"])

    return MirrorPairSet(
        uv=np.asarray(uv_rows, dtype=np.float64).reshape(-1, 2),
        uv_mirror=np.asarray(mirror_rows, dtype=np.float64).reshape(-1, 2),
        residual=np.asarray(residuals, dtype=np.float64),
        rejected=rejected)


def save_pairs_jsonl(pairs, path):
    """One pair per line: {"uv": [..], "uv_mirror": [..], "residual": r}."""
    def fmt(x):
        return float(f"{x:.9g}")

    with open(path, "w") as fh:
        for k in range(len(pairs)):
            fh.write(json.dumps({
                "uv": [fmt(pairs.uv[k, 0]), fmt(pairs.uv[k, 1])],
                "uv_mirror": [fmt(pairs.uv_mirror[k, 0]),
                              fmt(pairs.uv_mirror[k, 1])],
                "residual": fmt(pairs.residual[k]),
            }) + "\n")


def load_pairs_jsonl(path):
    uv, mirror, res = [], [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            uv.append(rec["uv"])
            mirror.append(rec["uv_mirror"])
            res.append(rec["residual"])
    return MirrorPairSet(uv=np.asarray(uv, dtype=np.float64).reshape(-1, 2),
                         uv_mirror=np.asarray(mirror, dtype=np.float64).reshape(-1, 2),
                         residual=np.asarray(res, dtype=np.float64))


def save_plane_json(plane, path):
    def fmt(x):
        return float(f"{x:.9g}")

    doc = {"centroid": [fmt(x) for x in plane.centroid],
           "normal": [fmt(x) for x in plane.normal],
           "eigenvalues": [fmt(x) for x in plane.eigenvalues],
           "warnings": list(plane.warnings)}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
