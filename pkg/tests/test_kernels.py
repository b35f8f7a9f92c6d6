"""The compiled kernels and the numpy fallback must agree exactly."""

import numpy as np
import pytest

from gridmesh import kernels
from gridmesh.geometry import box_mesh, icosphere
from gridmesh.mc_table import TRI_TABLE

compiled = pytest.mark.skipif(kernels.compiled_backend is None, reason="extension not built")
py = kernels.python_backend


def corners(mesh):
    return tuple(np.ascontiguousarray(c) for c in mesh.corners)


def brute_point_triangle(p, v0, v1, v2, samples=200):
    """Min distance over a dense barycentric grid; an upper bound that converges."""
    u, v = np.meshgrid(np.linspace(0, 1, samples), np.linspace(0, 1, samples))
    keep = u + v <= 1
    u, v = u[keep], v[keep]
    best = np.inf
    for a, b, c in zip(v0, v1, v2):
        pts = a + u[:, None] * (b - a) + v[:, None] * (c - a)
        best = min(best, np.min(np.linalg.norm(pts - p, axis=1)))
    return best


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
    if kernels.compiled_backend is not None:
        assert kernels.BACKEND == "cython"


def test_point_triangle_distance_regions():
    v0, v1, v2 = (np.array([[0.0, 0, 0]]), np.array([[1.0, 0, 0]]), np.array([[0.0, 1, 0]]))
    pts = np.array([
        [0.2, 0.2, 1.0],     # face
        [-1.0, -1.0, 0.0],   # vertex a
        [2.0, -0.5, 0.0],    # vertex b
        [0.5, -1.0, 0.0],    # edge ab
        [1.0, 1.0, 0.0],     # edge bc
        [-1.0, 0.5, 0.0],    # edge ac
    ])
    d, t = py.point_triangle_distance(pts, v0, v1, v2)
    expect = [1.0, np.sqrt(2), np.hypot(1, 0.5), 1.0, np.sqrt(0.5), 1.0]
    np.testing.assert_allclose(d, expect, rtol=0, atol=1e-15)
    assert np.all(t == 0)


def test_point_triangle_distance_vs_dense_sampling(rng):
    m = icosphere(1, radius=0.4)
    v0, v1, v2 = corners(m)
    pts = rng.uniform(-0.6, 0.6, (20, 3))
    d, _ = py.point_triangle_distance(pts, v0, v1, v2)
    for p, di in zip(pts, d):
        bf = brute_point_triangle(p, v0, v1, v2, samples=60)
        assert di <= bf + 1e-12
        assert bf - di < 1e-2


def test_triangulate_cubes_order():
    configs = np.array([0, 1, 255, 3], dtype=np.uint8)
    edges = np.arange(48, dtype=np.int64).reshape(4, 12) + 100
    out = py.triangulate_cubes(configs, edges, TRI_TABLE)
    expect = [
        edges[c][tri]
        for c in range(4)
        for tri in TRI_TABLE[configs[c]][:15].reshape(-1, 3)
        if tri[0] >= 0
    ]
    np.testing.assert_array_equal(out, expect)


@compiled
def test_segment_hits_equivalent(rng):
    for mesh in (icosphere(3, radius=0.4), box_mesh((0.3, 0.2, 0.25))):
        v = corners(mesh)
        a = rng.uniform(-0.5, 0.5, (3000, 3))
        b = a + rng.normal(scale=0.2, size=a.shape)
        # include axis-aligned segments through shared edges and vertices
        grid = np.linspace(-0.3, 0.3, 7)
        a2 = np.array([[-1.0, y, z] for y in grid for z in grid])
        b2 = a2 + [2.0, 0, 0]
        a, b = np.vstack([a, a2]), np.vstack([b, b2])
        got = kernels.compiled_backend.segment_hits(a, b, *v)
        ref = py.segment_hits(a, b, *v)
        for x, y in zip(got, ref):
            np.testing.assert_array_equal(x, y)


@compiled
def test_point_triangle_distance_equivalent(rng):
    m = icosphere(2, radius=0.4)
    v = corners(m)
    pts = np.vstack([rng.uniform(-0.6, 0.6, (500, 3)), m.vertices[:50], m.centroids[:50]])
    d1, t1 = kernels.compiled_backend.point_triangle_distance(pts, *v)
    d2, t2 = py.point_triangle_distance(pts, *v)
    np.testing.assert_array_equal(d1, d2)
    np.testing.assert_array_equal(t1, t2)


@compiled
def test_triangulate_equivalent(rng):
    configs = rng.integers(0, 256, 5000).astype(np.uint8)
    edges = np.ascontiguousarray(rng.integers(0, 10**6, (5000, 12)))
    np.testing.assert_array_equal(
        kernels.compiled_backend.triangulate_cubes(configs, edges, TRI_TABLE),
        py.triangulate_cubes(configs, edges, TRI_TABLE),
    )
    empty = np.zeros(0, dtype=np.uint8)
    assert kernels.compiled_backend.triangulate_cubes(empty, np.zeros((0, 12), np.int64), TRI_TABLE).shape == (0, 3)
    assert py.triangulate_cubes(empty, np.zeros((0, 12), np.int64), TRI_TABLE).shape == (0, 3)
