"""Training pair sampling and the test-time cube lattice."""

from dataclasses import dataclass

import numpy as np

from gridmesh.geometry import Aabb, GeometryError
from gridmesh.oracle import OnSurfaceError, PairLabel

DESK_RESOLUTION = 64
MAX_RESOLUTION = 1024
PADDING = 2
SCALES = (0.005, 0.01, 0.02)
SCALE_PROBS = (0.6, 0.3, 0.1)
MAX_RETRIES = 100

# Corner k of a cube sits at its minimum vertex plus CUBE_CORNERS[k]; corner 0
# is the anchor. Ordering follows the classic marching-cubes numbering.
CUBE_CORNERS = np.array(
    [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
     [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]],
    dtype=np.int64,
)
# Local edge -> (lower corner, upper corner) in canonical (lexicographic) order.
CUBE_EDGES = np.array(
    [[0, 1], [1, 2], [3, 2], [0, 3],
     [4, 5], [5, 6], [7, 6], [4, 7],
     [0, 4], [1, 5], [2, 6], [3, 7]],
    dtype=np.int64,
)
EDGE_AXIS = np.argmax(CUBE_CORNERS[CUBE_EDGES[:, 1]] - CUBE_CORNERS[CUBE_EDGES[:, 0]], axis=1)


@dataclass(frozen=True)
class PairSample:
    a: np.ndarray
    b: np.ndarray
    label: PairLabel
    edge_id: int | None = None


@dataclass(frozen=True, eq=False)
class PairBatch:
    """Struct-of-arrays batch of labelled pairs; alpha is NaN where no crossing."""

    a: np.ndarray
    b: np.ndarray
    same_side: np.ndarray
    alpha: np.ndarray
    scale: np.ndarray | None = None
    edge_ids: np.ndarray | None = None

    def __len__(self):
        return self.a.shape[0]

    def __getitem__(self, i):
        alpha = None if self.same_side[i] else float(self.alpha[i])
        eid = None if self.edge_ids is None else int(self.edge_ids[i])
        return PairSample(self.a[i], self.b[i], PairLabel(bool(self.same_side[i]), alpha), eid)


class CubeLattice:
    """Axis-aligned grid of cubes with compact, canonical edge ids.

    Edge ids are grouped by axis: all x edges, then y, then z. An edge is
    named by its lexicographically smaller vertex and its axis, so the same
    physical edge gets the same id from every incident cube.
    """

    def __init__(self, origin, cell, dims, resolution=None):
        self.origin = np.asarray(origin, dtype=np.float64)
        self.cell = float(cell)
        self.dims = tuple(int(d) for d in dims)
        self.resolution = resolution
        nx, ny, nz = self.dims
        self._counts = (
            nx * (ny + 1) * (nz + 1),
            (nx + 1) * ny * (nz + 1),
            (nx + 1) * (ny + 1) * nz,
        )
        self._offsets = (0, self._counts[0], self._counts[0] + self._counts[1])
        # per-axis block shapes (vertex ranges the edges can start from)
        self._shapes = (
            (nx, ny + 1, nz + 1),
            (nx + 1, ny, nz + 1),
            (nx + 1, ny + 1, nz),
        )

    @property
    def n_edges(self):
        return sum(self._counts)

    @property
    def n_vertices(self):
        nx, ny, nz = self.dims
        return (nx + 1) * (ny + 1) * (nz + 1)

    def vertex_position(self, v):
        return self.origin + self.cell * np.asarray(v, dtype=np.float64)

    def vertex_id(self, v):
        v = np.asarray(v, dtype=np.int64)
        _, ny, nz = self.dims
        return (v[..., 0] * (ny + 1) + v[..., 1]) * (nz + 1) + v[..., 2]

    def edge_id(self, v, axis):
        """Global id of the edge leaving vertex ``v`` in +``axis`` direction."""
        v = np.asarray(v, dtype=np.int64)
        axis = np.broadcast_to(np.asarray(axis, dtype=np.int64), v.shape[:-1])
        out = np.empty(v.shape[:-1], dtype=np.int64)
        for ax in range(3):
            m = axis == ax
            if not np.any(m):
                continue
            vv = v[m]
            shape = self._shapes[ax]
            if np.any(vv < 0) or np.any(vv >= np.array(shape)):
                raise GeometryError("edge outside lattice")
            out[m] = self._offsets[ax] + np.ravel_multi_index(vv.T, shape)
        return out

    def edge_vertex(self, ids):
        """Inverse of :meth:`edge_id`: ``(vertex, axis)`` per id."""
        ids = np.asarray(ids, dtype=np.int64)
        axis = np.searchsorted(np.array(self._offsets[1:]), ids, side="right")
        v = np.empty(ids.shape + (3,), dtype=np.int64)
        for ax in range(3):
            m = axis == ax
            if np.any(m):
                v[m] = np.stack(np.unravel_index(ids[m] - self._offsets[ax], self._shapes[ax]), -1)
        return v, axis

    def edge_points(self, ids):
        """Canonical endpoints ``(a, b)``; ``a`` is the lower lattice vertex."""
        v, axis = self.edge_vertex(ids)
        w = v.copy()
        w[np.arange(w.shape[0]), axis] += 1
        # both ends from integer coordinates, so a shared vertex is bit-identical
        return self.vertex_position(v), self.vertex_position(w)

    def cube_edge_ids(self, cubes):
        """(C, 12) global edge ids in local marching-cubes edge order."""
        cubes = np.asarray(cubes, dtype=np.int64).reshape(-1, 3)
        start = cubes[:, None, :] + CUBE_CORNERS[CUBE_EDGES[:, 0]][None]
        return self.edge_id(start, np.broadcast_to(EDGE_AXIS, (cubes.shape[0], 12)))

    def cube_corner_vertices(self, cubes):
        cubes = np.asarray(cubes, dtype=np.int64).reshape(-1, 3)
        return cubes[:, None, :] + CUBE_CORNERS[None]

    def all_cubes(self):
        nx, ny, nz = self.dims
        g = np.stack(np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij"), -1)
        return g.reshape(-1, 3)

    def cube_of(self, points):
        idx = np.floor((np.asarray(points, dtype=np.float64) - self.origin) / self.cell).astype(np.int64)
        return np.clip(idx, 0, np.array(self.dims) - 1)


def enumerate_lattice(bbox: Aabb, resolution: int):
    """Lattice with ``resolution`` cells across the bbox long side, padded by 2 cells."""
    if resolution < 2:
        raise GeometryError("resolution must be at least 2")
    if resolution > MAX_RESOLUTION:
        raise GeometryError("lattice too large")
    extent = bbox.extent
    longest = float(extent.max())
    cell = longest / resolution if longest > 0 else 1.0 / resolution
    cells = np.maximum(np.ceil(extent / cell - 1e-9).astype(np.int64), 1)
    dims = cells + 2 * PADDING
    origin = bbox.lo - PADDING * cell
    return CubeLattice(origin, cell, dims, resolution=resolution)


def active_cubes(lattice, cloud, dilation=3):
    """Cubes holding a cloud point, dilated by ``dilation`` cells; sorted unique rows."""
    base = np.unique(lattice.cube_of(cloud.points), axis=0)
    if dilation <= 0:
        return base
    r = np.arange(-dilation, dilation + 1)
    offs = np.stack(np.meshgrid(r, r, r, indexing="ij"), -1).reshape(-1, 3)
    grown = (base[:, None, :] + offs[None]).reshape(-1, 3)
    ok = np.all((grown >= 0) & (grown < np.array(lattice.dims)), axis=1)
    return np.unique(grown[ok], axis=0)


def cube_pairs(anchors, edge_length):
    """The 12 canonical edges of cubes whose minimum corner is ``anchors``."""
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 3)
    corners = anchors[:, None, :] + edge_length * CUBE_CORNERS[None].astype(np.float64)
    a = corners[:, CUBE_EDGES[:, 0]].reshape(-1, 3)
    b = corners[:, CUBE_EDGES[:, 1]].reshape(-1, 3)
    return a, b


def sample_training_pairs(cloud, shape, count, seed, edge_length=1.0 / DESK_RESOLUTION):
    """Perturbed-cube pair sampling around a point cloud.

    Each cube is anchored at ``q = p + U(-1, 1) * s`` for a uniformly chosen
    cloud point ``p`` and a scale ``s`` drawn from SCALES with SCALE_PROBS.
    A cube with an endpoint exactly on the surface is redrawn.
    """
    if count <= 0:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    n_cubes = -(-count // 12)
    pts = cloud.points
    scales = np.asarray(SCALES)

    def draw(k):
        pick = rng.integers(0, pts.shape[0], size=k)
        s = scales[rng.choice(len(SCALES), size=k, p=SCALE_PROBS)]
        q = pts[pick] + rng.uniform(-1.0, 1.0, (k, 3)) * s[:, None]
        return q, s

    anchors, s = draw(n_cubes)
    for attempt in range(MAX_RETRIES + 1):
        a, b = cube_pairs(anchors, edge_length)
        try:
            same, alpha = shape.label_pairs(a, b)
            break
        except OnSurfaceError as err:
            if attempt == MAX_RETRIES:
                raise
            bad = np.unique(err.rows // 12)
            anchors[bad], s[bad] = draw(bad.size)
    return PairBatch(
        a[:count], b[:count], same[:count], alpha[:count], scale=np.repeat(s, 12)[:count]
    )
