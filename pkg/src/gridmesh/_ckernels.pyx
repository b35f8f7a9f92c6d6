# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; see ``_pykernels`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


def segment_hits(double[:, ::1] a, double[:, ::1] b,
                 double[:, ::1] v0, double[:, ::1] v1, double[:, ::1] v2):
    cdef Py_ssize_t S = a.shape[0], T = v0.shape[0]
    cdef Py_ssize_t s, t, k
    cdef int kx, ky, kz, tmp
    cdef double d[3]
    cdef double o[3]
    cdef double slo[3]
    cdef double shi[3]
    cdef double sx, sy, sz, ax, ay, bx, by, cx, cy, u, v, w, det, tt, al
    cdef double Az, Bz, Cz
    cdef double lo, hi
    cdef bint skip

    lo_arr = np.minimum(np.minimum(np.asarray(v0), np.asarray(v1)), np.asarray(v2))
    hi_arr = np.maximum(np.maximum(np.asarray(v0), np.asarray(v1)), np.asarray(v2))
    cdef double[:, ::1] tlo = np.ascontiguousarray(lo_arr)
    cdef double[:, ::1] thi = np.ascontiguousarray(hi_arr)

    out_s = []
    out_t = []
    out_a = []
    for s in range(S):
        for k in range(3):
            o[k] = a[s, k]
            d[k] = b[s, k] - a[s, k]
            slo[k] = a[s, k] if a[s, k] < b[s, k] else b[s, k]
            shi[k] = b[s, k] if a[s, k] < b[s, k] else a[s, k]
        kz = 0
        if fabs(d[1]) > fabs(d[kz]):
            kz = 1
        if fabs(d[2]) > fabs(d[kz]):
            kz = 2
        if d[kz] == 0.0:
            continue
        kx = (kz + 1) % 3
        ky = (kx + 1) % 3
        if d[kz] < 0.0:
            tmp = kx
            kx = ky
            ky = tmp
        sx = d[kx] / d[kz]
        sy = d[ky] / d[kz]
        sz = 1.0 / d[kz]
        for t in range(T):
            skip = False
            for k in range(3):
                if thi[t, k] < slo[k] or tlo[t, k] > shi[k]:
                    skip = True
                    break
            if skip:
                continue
            ax = (v0[t, kx] - o[kx]) - sx * (v0[t, kz] - o[kz])
            ay = (v0[t, ky] - o[ky]) - sy * (v0[t, kz] - o[kz])
            bx = (v1[t, kx] - o[kx]) - sx * (v1[t, kz] - o[kz])
            by = (v1[t, ky] - o[ky]) - sy * (v1[t, kz] - o[kz])
            cx = (v2[t, kx] - o[kx]) - sx * (v2[t, kz] - o[kz])
            cy = (v2[t, ky] - o[ky]) - sy * (v2[t, kz] - o[kz])
            u = cx * by - cy * bx
            v = ax * cy - ay * cx
            w = bx * ay - by * ax
            if (u < 0.0 or v < 0.0 or w < 0.0) and (u > 0.0 or v > 0.0 or w > 0.0):
                continue
            det = u + v + w
            if det == 0.0:
                continue
            Az = sz * (v0[t, kz] - o[kz])
            Bz = sz * (v1[t, kz] - o[kz])
            Cz = sz * (v2[t, kz] - o[kz])
            tt = u * Az + v * Bz + w * Cz
            al = tt / det
            if al >= 0.0 and al <= 1.0:
                out_s.append(s)
                out_t.append(t)
                out_a.append(al)
    return (np.asarray(out_s, dtype=np.int64), np.asarray(out_t, dtype=np.int64),
            np.asarray(out_a, dtype=np.float64))


cdef inline double _dot(double ax, double ay, double az, double bx, double by, double bz) nogil:
    return ax * bx + ay * by + az * bz


cdef double _closest_sqdist(double px, double py, double pz,
                            double[:, ::1] v0, double[:, ::1] v1, double[:, ::1] v2,
                            Py_ssize_t t) nogil:
    cdef double abx = v1[t, 0] - v0[t, 0], aby = v1[t, 1] - v0[t, 1], abz = v1[t, 2] - v0[t, 2]
    cdef double acx = v2[t, 0] - v0[t, 0], acy = v2[t, 1] - v0[t, 1], acz = v2[t, 2] - v0[t, 2]
    cdef double apx = px - v0[t, 0], apy = py - v0[t, 1], apz = pz - v0[t, 2]
    cdef double d1 = _dot(abx, aby, abz, apx, apy, apz)
    cdef double d2 = _dot(acx, acy, acz, apx, apy, apz)
    cdef double bpx = px - v1[t, 0], bpy = py - v1[t, 1], bpz = pz - v1[t, 2]
    cdef double d3 = _dot(abx, aby, abz, bpx, bpy, bpz)
    cdef double d4 = _dot(acx, acy, acz, bpx, bpy, bpz)
    cdef double cpx = px - v2[t, 0], cpy = py - v2[t, 1], cpz = pz - v2[t, 2]
    cdef double d5 = _dot(abx, aby, abz, cpx, cpy, cpz)
    cdef double d6 = _dot(acx, acy, acz, cpx, cpy, cpz)
    cdef double va = d3 * d6 - d5 * d4
    cdef double vb = d5 * d2 - d1 * d6
    cdef double vc = d1 * d4 - d3 * d2
    cdef double qx, qy, qz, tt, denom, vv, ww
    if d1 <= 0 and d2 <= 0:
        qx = v0[t, 0]; qy = v0[t, 1]; qz = v0[t, 2]
    elif d3 >= 0 and d4 <= d3:
        qx = v1[t, 0]; qy = v1[t, 1]; qz = v1[t, 2]
    elif vc <= 0 and d1 >= 0 and d3 <= 0:
        tt = d1 / (d1 - d3)
        qx = v0[t, 0] + tt * abx; qy = v0[t, 1] + tt * aby; qz = v0[t, 2] + tt * abz
    elif d6 >= 0 and d5 <= d6:
        qx = v2[t, 0]; qy = v2[t, 1]; qz = v2[t, 2]
    elif vb <= 0 and d2 >= 0 and d6 <= 0:
        tt = d2 / (d2 - d6)
        qx = v0[t, 0] + tt * acx; qy = v0[t, 1] + tt * acy; qz = v0[t, 2] + tt * acz
    elif va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        tt = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        qx = v1[t, 0] + tt * (v2[t, 0] - v1[t, 0])
        qy = v1[t, 1] + tt * (v2[t, 1] - v1[t, 1])
        qz = v1[t, 2] + tt * (v2[t, 2] - v1[t, 2])
    else:
        denom = 1.0 / (va + vb + vc)
        vv = vb * denom
        ww = vc * denom
        qx = v0[t, 0] + vv * abx + ww * acx
        qy = v0[t, 1] + vv * aby + ww * acy
        qz = v0[t, 2] + vv * abz + ww * acz
    qx = px - qx
    qy = py - qy
    qz = pz - qz
    return qx * qx + qy * qy + qz * qz


def point_triangle_distance(points, double[:, ::1] v0, double[:, ::1] v1, double[:, ::1] v2):
    cdef double[:, ::1] p = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], T = v0.shape[0], i, t
    dist_arr = np.empty(n, dtype=np.float64)
    tri_arr = np.empty(n, dtype=np.int64)
    cdef double[::1] dist = dist_arr
    cdef long long[::1] tri = tri_arr
    cdef double best, sq
    cdef long long bi
    with nogil:
        for i in range(n):
            best = 1e300
            bi = -1
            for t in range(T):
                sq = _closest_sqdist(p[i, 0], p[i, 1], p[i, 2], v0, v1, v2, t)
                if sq < best:
                    best = sq
                    bi = t
            dist[i] = sqrt(best)
            tri[i] = bi
    return dist_arr, tri_arr


def triangulate_cubes(configs, cube_edges, table):
    cdef const unsigned char[::1] cfg = np.ascontiguousarray(configs, dtype=np.uint8)
    cdef const long long[:, ::1] ce = np.ascontiguousarray(cube_edges, dtype=np.int64)
    cdef const signed char[:, ::1] tab = np.ascontiguousarray(table, dtype=np.int8)
    cdef Py_ssize_t C = cfg.shape[0], c, j, count = 0
    for c in range(C):
        j = 0
        while j < 16 and tab[cfg[c], j] >= 0:
            count += 1
            j += 3
    out_arr = np.empty((count, 3), dtype=np.int64)
    cdef long long[:, ::1] out = out_arr
    cdef Py_ssize_t f = 0
    for c in range(C):
        j = 0
        while j < 16 and tab[cfg[c], j] >= 0:
            out[f, 0] = ce[c, tab[cfg[c], j]]
            out[f, 1] = ce[c, tab[cfg[c], j + 1]]
            out[f, 2] = ce[c, tab[cfg[c], j + 2]]
            f += 1
            j += 3
    return out_arr
