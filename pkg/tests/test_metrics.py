import numpy as np
import pytest

from gridmesh.geometry import PointCloud, icosphere, sample_surface_points
from gridmesh.mesher import EdgeSolutions, solve_edges
from gridmesh.metrics import (
    EvalReport,
    MetricError,
    chamfer_l1,
    evaluate,
    intersection_distance,
    normal_consistency,
)
from gridmesh.oracle import Sphere
from gridmesh.predictors import OraclePredictor, UdfRatioPredictor
from gridmesh.sampler import active_cubes, enumerate_lattice


def unit(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def brute_cd1(x, y):
    def one(src, dst):
        d = np.linalg.norm(src[:, None] - dst[None], axis=2)
        j = np.argmin(d, axis=1)
        return np.abs(src - dst[j]).sum(axis=1).mean()

    return 0.5 * one(x, y) + 0.5 * one(y, x)


def brute_nc(x, nx, y, ny):
    def one(src, ns, dst, nd):
        j = np.argmin(np.linalg.norm(src[:, None] - dst[None], axis=2), axis=1)
        return np.abs(np.sum(ns * nd[j], axis=1)).mean()

    return 0.5 * one(x, nx, y, ny) + 0.5 * one(y, ny, x, nx)


@pytest.mark.parametrize("n", [1, 50, 200])
def test_brute_force_equivalence(rng, n):
    x, y = rng.random((n, 3)), rng.random((n + 7, 3))
    nx, ny = unit(rng, n), unit(rng, n + 7)
    gx, gy = PointCloud(x, nx), PointCloud(y, ny)
    assert chamfer_l1(gx, gy) == brute_cd1(x, y)
    assert normal_consistency(gx, gy) == brute_nc(x, nx, y, ny)


def test_identical_and_symmetric(rng):
    c = PointCloud(rng.random((100, 3)), unit(rng, 100))
    assert chamfer_l1(c, c) == 0.0
    assert normal_consistency(c, c) == 1.0
    d = PointCloud(rng.random((80, 3)), unit(rng, 80))
    assert chamfer_l1(c, d) == pytest.approx(chamfer_l1(d, c), rel=1e-15)
    assert chamfer_l1(c, d) > 0


def test_shift_gives_delta(rng):
    pts = rng.random((100, 3))
    gap = np.min(np.linalg.norm(pts[:, None] - pts[None], axis=2) + np.eye(100) * 9)
    delta = 0.4 * gap
    shifted = pts + [delta, 0, 0]
    assert chamfer_l1(PointCloud(pts), PointCloud(shifted)) == pytest.approx(delta, rel=1e-9)


def test_nc_flip_invariance_and_orthogonal(rng):
    pts = rng.random((60, 3))
    n = unit(rng, 60)
    flip = np.where(rng.random(60) < 0.5, -1.0, 1.0)[:, None]
    assert normal_consistency(PointCloud(pts, n), PointCloud(pts, n * flip)) == pytest.approx(1.0)
    plane = np.c_[rng.random((40, 2)), np.zeros(40)]
    up = PointCloud(plane, np.tile([0, 0, 1.0], (40, 1)))
    side = PointCloud(plane, np.tile([1.0, 0, 0], (40, 1)))
    assert normal_consistency(up, side) == 0.0
    with pytest.raises(MetricError, match="normals required"):
        normal_consistency(PointCloud(plane), up)


def test_icosphere_within_chord_bound():
    r = 0.4
    ico = icosphere(3, radius=r)
    rin = np.min(np.abs(np.einsum("ij,ij->i", ico.normals, ico.corners[0])))
    rec = sample_surface_points(ico, 20000, seed=0)
    # radial projection onto the analytic sphere: each twin is at most r - rin away
    gt = PointCloud(r * rec.points / np.linalg.norm(rec.points, axis=1, keepdims=True))
    assert chamfer_l1(gt, rec) <= np.sqrt(3) * (r - rin)


def test_evaluate_self_and_deterministic():
    mesh = icosphere(2, radius=0.4)
    rep = evaluate(mesh, mesh, n_samples=2000, seed=3)
    assert rep.cd1 == 0.0 and rep.nc == pytest.approx(1.0)
    a = evaluate(mesh, Sphere(0.4), n_samples=2000, seed=5)
    b = evaluate(mesh, Sphere(0.4), n_samples=2000, seed=5)
    assert (a.cd1, a.nc) == (b.cd1, b.nc)
    assert set(a.to_dict()) == {"cd1", "nc", "n_samples", "seed", "seconds", "intersection_distance"}
    with pytest.raises(MetricError):
        EvalReport(-1.0, 0.5, 1, 0, 0.0)
    with pytest.raises(MetricError):
        evaluate(mesh.subset(np.zeros(mesh.n_triangles, bool)), mesh)


def lattice_solutions(res=16):
    shape = Sphere(0.4)
    cloud = shape.sample_surface(1000, 0)
    lat = enumerate_lattice(shape.bbox(), res)
    cubes = active_cubes(lat, cloud, 2)
    return shape, lat, cubes, solve_edges(lat, cubes, OraclePredictor(shape))


def test_intersection_distance_cases():
    shape, lat, cubes, gt = lattice_solutions(16)
    assert intersection_distance(gt, gt, lat) == 0.0
    shifted = EdgeSolutions(gt.ids, gt.prob_same, gt.crossing, gt.alpha + 0.1)
    assert intersection_distance(shifted, gt, lat) == pytest.approx(0.1, rel=1e-9)
    gifs = solve_edges(lat, cubes, UdfRatioPredictor(shape))
    assert intersection_distance(gifs, gt, lat) > 0
    none = EdgeSolutions(gt.ids, gt.prob_same, np.zeros_like(gt.crossing), gt.alpha)
    with pytest.raises(MetricError, match="no comparable edges"):
        intersection_distance(none, gt, lat)
