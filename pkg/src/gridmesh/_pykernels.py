"""Pure numpy implementations of the hot kernels.

Each function here has a twin in ``_ckernels.pyx`` with an identical
signature and identical results; ``gridmesh.kernels`` picks one at import.
"""

import numpy as np


def segment_hits(a, b, v0, v1, v2):
    """Watertight segment/triangle test for every (segment, triangle) pair.

    Parameters
    ----------
    a, b : (S, 3) float64
        Segment endpoints.
    v0, v1, v2 : (T, 3) float64
        Triangle corners.

    Returns
    -------
    seg, tri : (H,) int64
    alpha : (H,) float64
        Hit parameter along ``a + alpha * (b - a)``, in [0, 1].
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    lo = np.minimum(np.minimum(v0, v1), v2)
    hi = np.maximum(np.maximum(v0, v1), v2)
    out_s, out_t, out_a = [], [], []
    for s in range(a.shape[0]):
        o = a[s]
        d = b[s] - o
        slo = np.minimum(o, b[s])
        shi = np.maximum(o, b[s])
        cand = np.nonzero(np.all(hi >= slo, axis=1) & np.all(lo <= shi, axis=1))[0]
        if cand.size == 0:
            continue
        kz = int(np.argmax(np.abs(d)))
        if d[kz] == 0.0:
            continue
        kx = (kz + 1) % 3
        ky = (kx + 1) % 3
        if d[kz] < 0.0:
            kx, ky = ky, kx
        sx = d[kx] / d[kz]
        sy = d[ky] / d[kz]
        sz = 1.0 / d[kz]
        A = v0[cand] - o
        B = v1[cand] - o
        C = v2[cand] - o
        ax = A[:, kx] - sx * A[:, kz]
        ay = A[:, ky] - sy * A[:, kz]
        bx = B[:, kx] - sx * B[:, kz]
        by = B[:, ky] - sy * B[:, kz]
        cx = C[:, kx] - sx * C[:, kz]
        cy = C[:, ky] - sy * C[:, kz]
        u = cx * by - cy * bx
        v = ax * cy - ay * cx
        w = bx * ay - by * ax
        neg = (u < 0.0) | (v < 0.0) | (w < 0.0)
        pos = (u > 0.0) | (v > 0.0) | (w > 0.0)
        det = u + v + w
        ok = ~(neg & pos) & (det != 0.0)
        if not ok.any():
            continue
        t = (u * (sz * A[:, kz]) + v * (sz * B[:, kz]) + w * (sz * C[:, kz]))
        with np.errstate(divide="ignore", invalid="ignore"):
            alpha = t / det
        ok &= (alpha >= 0.0) & (alpha <= 1.0)
        idx = np.nonzero(ok)[0]
        out_s.append(np.full(idx.size, s, dtype=np.int64))
        out_t.append(cand[idx].astype(np.int64))
        out_a.append(alpha[idx])
    if not out_s:
        return (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.float64))
    return np.concatenate(out_s), np.concatenate(out_t), np.concatenate(out_a)


def _dot(x, y):
    # fixed left-to-right order, matching the compiled kernel
    return x[:, 0] * y[:, 0] + x[:, 1] * y[:, 1] + x[:, 2] * y[:, 2]


def _closest_sqdist(p, v0, v1, v2):
    # Region-based closest point on triangle, vectorised over triangles.
    ab = v1 - v0
    ac = v2 - v0
    ap = p - v0
    d1 = _dot(ab, ap)
    d2 = _dot(ac, ap)
    bp = p - v1
    d3 = _dot(ab, bp)
    d4 = _dot(ac, bp)
    cp = p - v2
    d5 = _dot(ab, cp)
    d6 = _dot(ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    q = np.empty_like(v0)
    done = np.zeros(v0.shape[0], dtype=bool)

    def take(mask, value):
        m = mask & ~done
        q[m] = value[m] if value.ndim == 2 else value
        done[m] = True

    take((d1 <= 0) & (d2 <= 0), v0)
    take((d3 >= 0) & (d4 <= d3), v1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = d1 / (d1 - d3)
        take((vc <= 0) & (d1 >= 0) & (d3 <= 0), v0 + t[:, None] * ab)
        take((d6 >= 0) & (d5 <= d6), v2)
        t = d2 / (d2 - d6)
        take((vb <= 0) & (d2 >= 0) & (d6 <= 0), v0 + t[:, None] * ac)
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        take((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0), v1 + t[:, None] * (v2 - v1))
        denom = 1.0 / (va + vb + vc)
        v = vb * denom
        w = vc * denom
        take(np.ones_like(done), v0 + v[:, None] * ab + w[:, None] * ac)
    diff = p - q
    return _dot(diff, diff)


def point_triangle_distance(points, v0, v1, v2):
    """Unsigned distance from each point to the nearest triangle.

    Returns ``(dist, tri)`` where ``tri`` is the index of the closest
    triangle (lowest index on ties).
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = points.shape[0]
    dist = np.empty(n, dtype=np.float64)
    tri = np.empty(n, dtype=np.int64)
    for i in range(n):
        sq = _closest_sqdist(points[i], v0, v1, v2)
        j = int(np.argmin(sq))
        tri[i] = j
        dist[i] = np.sqrt(sq[j])
    return dist, tri


def triangulate_cubes(configs, cube_edges, table):
    """Expand per-cube corner configurations into triangles of global edge ids.

    ``configs`` is (C,) uint8, ``cube_edges`` (C, 12) int64 with the global
    edge id of each local edge, ``table`` the (256, 16) int8 case table
    padded with -1. Triangles are emitted in cube order, then table order.
    """
    configs = np.asarray(configs, dtype=np.uint8)
    local = table[configs.astype(np.intp)]  # (C, 16)
    ntri = (local[:, ::3] >= 0).sum(axis=1)
    cube_idx = np.repeat(np.arange(configs.shape[0]), ntri)
    slot = np.concatenate([np.arange(k) for k in ntri]) if ntri.size else np.zeros(0, np.intp)
    if cube_idx.size == 0:
        return np.zeros((0, 3), dtype=np.int64)
    loc = local[cube_idx[:, None], (3 * slot)[:, None] + np.arange(3)[None, :]]
    return np.asarray(cube_edges, dtype=np.int64)[cube_idx[:, None], loc]
