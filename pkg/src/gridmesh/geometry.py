"""Core geometric types and queries shared by every other module."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from gridmesh import kernels

DEGENERATE_AREA = 1e-12
MERGE_TOL = 1e-9
# Nearest neighbours are picked by Euclidean distance; CD1 then sums the L1
# norm of the displacement.
NN_METRIC = "euclidean"


class GeometryError(ValueError):
    pass


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def as_points(p):
    p = np.asarray(p, dtype=np.float64)
    return p.reshape(-1, 3)


@dataclass(frozen=True, eq=False)
class Aabb:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _frozen(np.reshape(self.lo, 3), np.float64)
        hi = _frozen(np.reshape(self.hi, 3), np.float64)
        if np.any(lo > hi):
            raise GeometryError("aabb min corner exceeds max corner")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def of(cls, points):
        p = as_points(points)
        return cls(p.min(axis=0), p.max(axis=0))

    @property
    def extent(self):
        return self.hi - self.lo

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        pts = as_points(self.points)
        if pts.shape[0] == 0:
            raise GeometryError("point cloud is empty")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("point coordinates must be finite")
        object.__setattr__(self, "points", _frozen(pts, np.float64))
        if self.normals is not None:
            n = as_points(self.normals)
            if n.shape != pts.shape:
                raise GeometryError("normals must match points")
            if np.any(np.abs(np.linalg.norm(n, axis=1) - 1.0) > 1e-6):
                raise GeometryError("normals must be unit length")
            object.__setattr__(self, "normals", _frozen(n, np.float64))

    def __len__(self):
        return self.points.shape[0]

    @property
    def bbox(self):
        return Aabb.of(self.points)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Indexed triangle mesh; degenerate triangles are kept but flagged."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = as_points(self.vertices)
        f = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if f.size and (f.min() < 0 or f.max() >= v.shape[0]):
            raise GeometryError("triangle index out of range")
        object.__setattr__(self, "vertices", _frozen(v, np.float64))
        object.__setattr__(self, "triangles", _frozen(f, np.int64))

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @cached_property
    def corners(self):
        v = self.vertices
        f = self.triangles
        return v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]

    @cached_property
    def _cross(self):
        a, b, c = self.corners
        return np.cross(b - a, c - a)

    @cached_property
    def areas(self):
        return 0.5 * np.linalg.norm(self._cross, axis=1)

    @cached_property
    def degenerate(self):
        return self.areas < DEGENERATE_AREA

    @cached_property
    def normals(self):
        """Unit face normals; rows of degenerate triangles are zero."""
        n = np.zeros_like(self._cross)
        ok = ~self.degenerate
        n[ok] = self._cross[ok] / np.linalg.norm(self._cross[ok], axis=1, keepdims=True)
        n.setflags(write=False)
        return n

    @cached_property
    def centroids(self):
        a, b, c = self.corners
        return (a + b + c) / 3.0

    @property
    def bbox(self):
        return Aabb.of(self.vertices)

    def compact(self):
        """Drop unreferenced vertices."""
        used = np.unique(self.triangles)
        remap = np.full(self.vertices.shape[0], -1, dtype=np.int64)
        remap[used] = np.arange(used.size)
        return TriangleMesh(self.vertices[used], remap[self.triangles])

    def subset(self, keep):
        return TriangleMesh(self.vertices, self.triangles[keep]).compact()


class SpatialIndex:
    """Nearest-neighbour index over a fixed point set.

    Answers agree with a brute-force scan, including the lowest-index rule
    on exact distance ties.
    """

    def __init__(self, points, workers=1):
        self.points = _frozen(as_points(points), np.float64)
        if self.points.shape[0] == 0:
            raise GeometryError("spatial index needs at least one point")
        self._tree = cKDTree(self.points)
        self.workers = workers

    def __len__(self):
        return self.points.shape[0]

    def nearest(self, queries):
        """Return ``(index, distance)`` arrays for each query row."""
        q = as_points(queries)
        n = len(self)
        if n == 1:
            idx = np.zeros(q.shape[0], dtype=np.int64)
        else:
            d, idx = self._tree.query(q, k=2, workers=self.workers)
            idx = idx[:, 0].astype(np.int64)
            tied = np.nonzero(d[:, 0] == d[:, 1])[0]
            for i in tied:
                cand = self._tree.query_ball_point(q[i], d[i, 0] * (1 + 1e-12) + 1e-300)
                cand = np.asarray(cand, dtype=np.int64)
                cd = np.linalg.norm(self.points[cand] - q[i], axis=1)
                idx[i] = cand[cd == cd.min()].min()
        dist = np.linalg.norm(self.points[idx] - q, axis=1)
        return idx, dist

    def knn(self, queries, k):
        q = as_points(queries)
        k = min(k, len(self))
        d, idx = self._tree.query(q, k=k, workers=self.workers)
        if k == 1:
            d = d[:, None]
            idx = idx[:, None]
        return idx.astype(np.int64), d


def nearest_neighbor(index, q):
    """Single-query form of :meth:`SpatialIndex.nearest`."""
    idx, dist = index.nearest(np.asarray(q, dtype=np.float64)[None])
    return index.points[idx[0]].copy(), float(dist[0])


def sample_surface_points(mesh, count, seed):
    """Area-weighted random samples with the normal of their source triangle."""
    if count <= 0:
        raise GeometryError("count must be positive")
    ok = np.nonzero(~mesh.degenerate)[0]
    if ok.size == 0:
        raise GeometryError("no samplable area")
    rng = np.random.default_rng(seed)
    w = mesh.areas[ok]
    tri = ok[rng.choice(ok.size, size=count, p=w / w.sum())]
    r1 = np.sqrt(rng.random(count))
    r2 = rng.random(count)
    a, b, c = (x[tri] for x in mesh.corners)
    pts = (1 - r1)[:, None] * a + (r1 * (1 - r2))[:, None] * b + (r1 * r2)[:, None] * c
    return PointCloud(pts, mesh.normals[tri])


def segments_mesh_hits(mesh, a, b):
    """Sorted, merged hit parameters for many segments.

    Returns a list with one ``[(alpha, triangle), ...]`` list per segment.
    """
    a = np.ascontiguousarray(as_points(a))
    b = np.ascontiguousarray(as_points(b))
    v0, v1, v2 = (np.ascontiguousarray(x) for x in mesh.corners)
    seg, tri, alpha = kernels.segment_hits(a, b, v0, v1, v2)
    order = np.lexsort((tri, alpha, seg))
    out = [[] for _ in range(a.shape[0])]
    for s, t, al in zip(seg[order], tri[order], alpha[order]):
        hits = out[s]
        if hits and al - hits[-1][0] <= MERGE_TOL:
            continue
        hits.append((float(al), int(t)))
    return out


def segment_mesh_intersections(mesh, a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.array_equal(a, b):
        raise GeometryError("degenerate segment")
    return segments_mesh_hits(mesh, a[None], b[None])[0]


def edge_use_counts(mesh):
    """Map each undirected mesh edge to the number of triangles using it."""
    f = mesh.triangles
    e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    e.sort(axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    return uniq, counts


def euler_characteristic(mesh):
    m = mesh.compact()
    edges, _ = edge_use_counts(m)
    return m.vertices.shape[0] - edges.shape[0] + m.n_triangles


def boundary_loops(mesh):
    """Number of connected components formed by edges used exactly once."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    edges, counts = edge_use_counts(mesh)
    bd = edges[counts == 1]
    if bd.shape[0] == 0:
        return 0
    verts, inv = np.unique(bd, return_inverse=True)
    inv = inv.reshape(-1, 2)
    n = verts.size
    g = coo_matrix((np.ones(inv.shape[0]), (inv[:, 0], inv[:, 1])), shape=(n, n))
    ncomp, _ = connected_components(g, directed=False)
    return ncomp


def icosphere(subdivisions=4, radius=1.0, center=(0.0, 0.0, 0.0)):
    t = (1.0 + 5.0 ** 0.5) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    v = [np.array(p, dtype=np.float64) / np.linalg.norm(p) for p in verts]
    f = faces
    for _ in range(subdivisions):
        cache = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = v[i] + v[j]
                v.append(m / np.linalg.norm(m))
                cache[key] = len(v) - 1
            return cache[key]

        nf = []
        for a, b, c in f:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        f = nf
    verts = np.array(v) * radius + np.asarray(center, dtype=np.float64)
    return TriangleMesh(verts, np.array(f, dtype=np.int64))


def box_mesh(half_extents=(0.5, 0.5, 0.5), center=(0.0, 0.0, 0.0)):
    """Closed axis-aligned box, 12 outward-facing triangles."""
    h = np.asarray(half_extents, dtype=np.float64)
    corners = np.array(
        [[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=np.float64
    )
    v = corners * h + np.asarray(center, dtype=np.float64)
    # corner index = 4*ix + 2*iy + iz
    quads = [
        (0, 1, 3, 2), (4, 6, 7, 5),  # -x, +x
        (0, 4, 5, 1), (2, 3, 7, 6),  # -y, +y
        (0, 2, 6, 4), (1, 5, 7, 3),  # -z, +z
    ]
    f = []
    for a, b, c, d in quads:
        f += [(a, b, c), (a, c, d)]
    return TriangleMesh(v, np.array(f, dtype=np.int64))


def normalize_points(points):
    """Affine map sending the bbox long side to [-0.5, 0.5], centred at 0.

    Returns ``(normalized, center, scale)`` with ``p = normalized * scale + center``.
    """
    p = as_points(points)
    box = Aabb.of(p)
    scale = float(box.extent.max())
    if scale <= 0.0:
        scale = 1.0
    return (p - box.center) / scale, box.center, scale
