"""Marching-cubes meshing from per-edge relative signs and crossing parameters."""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components
from scipy.spatial import cKDTree

from gridmesh import kernels
from gridmesh.geometry import TriangleMesh, boundary_loops, edge_use_counts, euler_characteristic
from gridmesh.mc_table import TRI_TABLE
from gridmesh.sampler import CUBE_CORNERS, CUBE_EDGES

ALPHA_CLAMP = (1e-6, 1.0 - 1e-6)

# Spanning tree of cube edges used to derive corner signs from the anchor
# (corner 0): (parent corner, child corner, local edge). Top-face edges 4, 6, 7
# and bottom edge 2 are redundant and ignored for the configuration.
SPANNING_TREE = ((0, 1, 0), (0, 3, 3), (0, 4, 8), (1, 2, 1), (1, 5, 9), (3, 7, 11), (2, 6, 10))


class MeshingError(RuntimeError):
    pass


@dataclass(eq=False)
class EdgeSolutions:
    """One entry per global edge id, sorted by id; alpha is NaN where unsolved."""

    ids: np.ndarray
    prob_same: np.ndarray
    crossing: np.ndarray
    alpha: np.ndarray

    def __len__(self):
        return self.ids.shape[0]

    def index_of(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        pos = np.searchsorted(self.ids, ids)
        pos = np.minimum(pos, len(self.ids) - 1)
        if len(self.ids) == 0 or np.any(self.ids[pos] != ids):
            raise MeshingError("incoherent solve: edge id not in solution set")
        return pos

    def alpha_of(self, ids):
        return self.alpha[self.index_of(ids)]

    def crossing_of(self, ids):
        return self.crossing[self.index_of(ids)]


def solve_edges(lattice, cubes, predictor):
    """Evaluate every unique edge of ``cubes`` once.

    An edge crosses when its same-side probability is below 0.5; a
    probability of exactly 0.5 counts as same side. ``alpha`` is queried
    only for crossing edges.
    """
    ids = np.unique(lattice.cube_edge_ids(cubes))
    a, b = lattice.edge_points(ids)
    prob = np.asarray(predictor.same_side_prob(a, b), dtype=np.float64)
    crossing = prob < 0.5
    alpha = np.full(ids.shape[0], np.nan)
    if np.any(crossing):
        alpha[crossing] = predictor.alpha(a[crossing], b[crossing])
    return EdgeSolutions(ids, prob, crossing, alpha)


def vertex_parity(lattice, cubes, solutions):
    """Global side bit per lattice vertex, propagated along solved edges.

    Each connected component is rooted at its smallest vertex id (parity 0);
    the parity of every other vertex is the XOR of crossings along its BFS
    tree path. Returns ``(vertex_ids, parity)`` sorted by vertex id.
    """
    v, axis = lattice.edge_vertex(solutions.ids)
    w = v.copy()
    w[np.arange(w.shape[0]), axis] += 1
    vu = lattice.vertex_id(v)
    vw = lattice.vertex_id(w)
    nodes = np.unique(np.concatenate([vu, vw]))
    iu = np.searchsorted(nodes, vu)
    iw = np.searchsorted(nodes, vw)
    n = nodes.size
    # store crossing + 1 so that non-crossing edges survive as explicit entries
    weight = solutions.crossing.astype(np.int8) + 1
    g = coo_matrix((weight, (iu, iw)), shape=(n, n)).tocsr()
    sym = (g + g.T).tocsr()
    ncomp, labels = connected_components(sym, directed=False)
    pred = np.arange(n)
    for c in range(ncomp):
        root = int(np.argmax(labels == c))
        _, p = breadth_first_order(sym, root, directed=False, return_predecessors=True)
        members = labels == c
        pred[members] = np.where(p[members] < 0, np.nonzero(members)[0], p[members])
    xor = np.zeros(n, dtype=np.int8)
    nonroot = pred != np.arange(n)
    child = np.nonzero(nonroot)[0]
    parent = pred[child]
    xor[child] = np.asarray(sym[parent, child]).ravel() - 1
    # pointer jumping: accumulate XOR to the root
    ptr = pred.copy()
    while True:
        nxt = ptr[ptr]
        if np.array_equal(nxt, ptr):
            break
        xor = xor ^ xor[ptr]
        ptr = nxt
    return nodes, xor.astype(bool)


def corner_configs(lattice, cubes, solutions, parity=None):
    """8-bit marching-cubes configuration per cube.

    Corner signs relative to the anchor follow SPANNING_TREE; the anchor's
    own side bit comes from :func:`vertex_parity`.
    """
    cubes = np.asarray(cubes, dtype=np.int64).reshape(-1, 3)
    if parity is None:
        parity = vertex_parity(lattice, cubes, solutions)
    nodes, bits = parity
    ce = lattice.cube_edge_ids(cubes)
    cross = solutions.crossing_of(ce.ravel()).reshape(ce.shape)
    rel = np.zeros((cubes.shape[0], 8), dtype=bool)
    for parent, child, edge in SPANNING_TREE:
        rel[:, child] = rel[:, parent] ^ cross[:, edge]
    anchor = lattice.vertex_id(cubes)
    anchor_bit = bits[np.searchsorted(nodes, anchor)]
    corner = rel ^ anchor_bit[:, None]
    weights = (1 << np.arange(8)).astype(np.int64)
    return (corner.astype(np.int64) @ weights).astype(np.uint8)


def implied_edges(lattice, cubes, configs):
    """Global ids of edges whose endpoint bits differ under ``configs``."""
    bits = (np.asarray(configs, dtype=np.int64)[:, None] >> np.arange(8)) & 1
    differ = bits[:, CUBE_EDGES[:, 0]] != bits[:, CUBE_EDGES[:, 1]]
    ce = lattice.cube_edge_ids(cubes)
    return np.unique(ce[differ])


def extract_mesh(lattice, cubes, configs, solutions, alpha_clamp=ALPHA_CLAMP):
    """Triangulate ``cubes``; one welded vertex per crossing edge id."""
    ce = lattice.cube_edge_ids(cubes)
    tri_edges = kernels.triangulate_cubes(
        np.ascontiguousarray(configs, dtype=np.uint8), np.ascontiguousarray(ce), TRI_TABLE
    )
    if tri_edges.shape[0] == 0:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    used = np.unique(tri_edges)
    alpha = solutions.alpha_of(used)
    if np.any(np.isnan(alpha)):
        raise MeshingError("incoherent solve: configuration references an unsolved edge")
    alpha = np.clip(alpha, *alpha_clamp)
    a, b = lattice.edge_points(used)
    verts = a + alpha[:, None] * (b - a)
    return TriangleMesh(verts, np.searchsorted(used, tri_edges))


def reconstruct(lattice, cubes, predictor, alpha_clamp=ALPHA_CLAMP):
    """Solve edges, build configurations, fill alphas the repair implies, extract.

    Returns ``(mesh, solutions, configs)``.
    """
    cubes = np.asarray(cubes, dtype=np.int64).reshape(-1, 3)
    sol = solve_edges(lattice, cubes, predictor)
    configs = corner_configs(lattice, cubes, sol)
    needed = implied_edges(lattice, cubes, configs)
    pos = sol.index_of(needed)
    missing = pos[np.isnan(sol.alpha[pos])]
    if missing.size:
        a, b = lattice.edge_points(sol.ids[missing])
        sol.alpha[missing] = predictor.alpha(a, b)
    mesh = extract_mesh(lattice, cubes, configs, sol, alpha_clamp)
    return mesh, sol, configs


def postprocess(mesh, k=10, threshold=0.65):
    """Drop triangles whose normal disagrees with their k nearest neighbours.

    For each triangle, ``I`` is the mean of ``|<n, n_i>|`` over the ``k``
    nearest other triangles by centroid distance; triangles with
    ``I < threshold`` are removed. Scores are computed once on the input
    mesh. Degenerate triangles are neither scored nor used as neighbours.
    """
    if mesh.n_triangles == 0:
        raise ValueError("mesh is empty")
    ok = np.nonzero(~mesh.degenerate)[0]
    keep = np.ones(mesh.n_triangles, dtype=bool)
    k = min(k, ok.size - 1)
    if k < 1:
        return mesh
    cent = mesh.centroids[ok]
    normals = mesh.normals[ok]
    _, nbr = cKDTree(cent).query(cent, k=k + 1)
    nbr = nbr.reshape(ok.size, k + 1)
    self_idx = np.arange(ok.size)[:, None]
    is_self = nbr == self_idx
    # drop the self entry, or the farthest one when a duplicate centroid displaced it
    drop = np.where(is_self.any(axis=1), is_self.argmax(axis=1), k)
    mask = np.ones_like(nbr, dtype=bool)
    mask[np.arange(ok.size), drop] = False
    nbr = nbr[mask].reshape(ok.size, k)
    score = np.abs(np.einsum("ij,ikj->ik", normals, normals[nbr])).mean(axis=1)
    keep[ok[score < threshold]] = False
    return mesh.subset(keep)


def topology_report(mesh):
    edges, counts = edge_use_counts(mesh)
    return {
        "vertices": int(mesh.compact().vertices.shape[0]),
        "triangles": int(mesh.n_triangles),
        "euler": int(euler_characteristic(mesh)),
        "boundary_edges": int(np.sum(counts == 1)),
        "nonmanifold_edges": int(np.sum(counts > 2)),
        "boundary_loops": int(boundary_loops(mesh)),
        "closed_manifold": bool(counts.size > 0 and np.all(counts == 2)),
    }


def write_edge_csv(path, lattice, solutions):
    a, b = lattice.edge_points(solutions.ids)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["edge_id", "ax", "ay", "az", "bx", "by", "bz", "crossing", "alpha"])
        for i in range(len(solutions)):
            al = solutions.alpha[i]
            w.writerow(
                [int(solutions.ids[i]), *map(repr, a[i].tolist()), *map(repr, b[i].tolist()),
                 int(solutions.crossing[i]), "" if np.isnan(al) else repr(float(al))]
            )


__all__ = [
    "CUBE_CORNERS",
    "EdgeSolutions",
    "MeshingError",
    "corner_configs",
    "extract_mesh",
    "implied_edges",
    "postprocess",
    "reconstruct",
    "solve_edges",
    "topology_report",
    "vertex_parity",
    "write_edge_csv",
]
