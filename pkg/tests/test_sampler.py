import numpy as np
import pytest

from gridmesh.geometry import Aabb, GeometryError, PointCloud
from gridmesh.oracle import OnSurfaceError, Sphere
from gridmesh.sampler import (
    CUBE_CORNERS,
    CUBE_EDGES,
    EDGE_AXIS,
    MAX_RETRIES,
    SCALES,
    active_cubes,
    enumerate_lattice,
    sample_training_pairs,
)

UNIT = Aabb([0, 0, 0], [1, 1, 1])


def sphere_cloud(n=3000, seed=0):
    return Sphere(0.4).sample_surface(n, seed)


def test_cube_tables():
    assert CUBE_EDGES.shape == (12, 2)
    assert np.bincount(EDGE_AXIS).tolist() == [4, 4, 4]
    d = CUBE_CORNERS[CUBE_EDGES[:, 1]] - CUBE_CORNERS[CUBE_EDGES[:, 0]]
    # canonical order: every local edge runs from the lower to the upper corner
    assert np.all(d.sum(axis=1) == 1) and np.all(d >= 0)


def test_one_cube_from_twelve_pairs():
    edge = 1 / 64
    batch = sample_training_pairs(sphere_cloud(), Sphere(0.4), 12, seed=0, edge_length=edge)
    assert len(batch) == 12
    d = batch.b - batch.a
    np.testing.assert_allclose(np.linalg.norm(d, axis=1), edge, atol=1e-9)
    assert np.bincount(np.argmax(np.abs(d), axis=1), minlength=3).tolist() == [4, 4, 4]
    corners = np.unique(np.vstack([batch.a, batch.b]), axis=0)
    assert corners.shape[0] == 8
    assert len({float(s) for s in batch.scale}) == 1


def test_count_not_multiple_of_twelve():
    batch = sample_training_pairs(sphere_cloud(), Sphere(0.4), 13, seed=0)
    assert len(batch) == 13


def test_scale_histogram():
    n_cubes = 100_000
    batch = sample_training_pairs(sphere_cloud(), Sphere(0.4), 12 * n_cubes, seed=5)
    per_cube = batch.scale[::12]
    freq = [np.mean(per_cube == s) for s in SCALES]
    np.testing.assert_allclose(freq, [0.6, 0.3, 0.1], atol=0.01)


def test_sphere_crossing_fraction_and_labels():
    shape = Sphere(0.4)
    batch = sample_training_pairs(sphere_cloud(), shape, 4000, seed=2)
    frac = 1 - batch.same_side.mean()
    assert 0 < frac < 1
    same, _ = shape.label_pairs(batch.a, batch.b)
    np.testing.assert_array_equal(same, batch.same_side)
    first = batch[0]
    assert first.label.same_side == bool(batch.same_side[0])


def test_sampling_deterministic():
    c, s = sphere_cloud(), Sphere(0.4)
    x = sample_training_pairs(c, s, 600, seed=11)
    y = sample_training_pairs(c, s, 600, seed=11)
    z = sample_training_pairs(c, s, 600, seed=12)
    np.testing.assert_array_equal(x.a, y.a)
    np.testing.assert_array_equal(x.alpha, y.alpha)
    assert not np.array_equal(x.a, z.a)


class FlakyShape:
    """Reports pair 3 as touching the surface for the first ``fails`` calls."""

    def __init__(self, fails):
        self.fails = fails
        self.calls = 0

    def label_pairs(self, a, b):
        self.calls += 1
        if self.calls <= self.fails:
            raise OnSurfaceError([3])
        return np.ones(len(a), dtype=bool), np.full(len(a), np.nan)


def test_on_surface_cube_is_redrawn():
    shape = FlakyShape(2)
    batch = sample_training_pairs(sphere_cloud(), shape, 24, seed=0)
    assert shape.calls == 3 and len(batch) == 24
    with pytest.raises(OnSurfaceError):
        sample_training_pairs(sphere_cloud(), FlakyShape(MAX_RETRIES + 1), 24, seed=0)
    with pytest.raises(ValueError):
        sample_training_pairs(sphere_cloud(), Sphere(0.4), 0, seed=0)


def test_lattice_limits():
    with pytest.raises(GeometryError, match="lattice too large"):
        enumerate_lattice(UNIT, 1025)
    with pytest.raises(GeometryError):
        enumerate_lattice(UNIT, 1)


def test_small_lattice_combinatorics():
    lat = enumerate_lattice(UNIT, 2)
    assert lat.dims == (6, 6, 6)
    np.testing.assert_allclose(lat.origin, [-1, -1, -1])
    # the bbox plus two cells of padding is covered
    hi = lat.vertex_position(lat.dims)
    assert np.all(lat.origin <= UNIT.lo - 2 * lat.cell + 1e-12)
    assert np.all(hi >= UNIT.hi + 2 * lat.cell - 1e-12)
    ce = lat.cube_edge_ids(lat.all_cubes())
    assert all(len(set(row)) == 12 for row in ce.tolist())
    assert np.bincount(ce.ravel()).max() == 4


def test_edge_count_closed_form_res64():
    lat = enumerate_lattice(Sphere(0.4).bbox(), 64)
    n = lat.dims[0]
    assert lat.dims == (n, n, n)
    ids = np.unique(lat.cube_edge_ids(lat.all_cubes()))
    assert ids.size == lat.n_edges == 3 * n * (n + 1) ** 2
    np.testing.assert_array_equal(ids, np.arange(lat.n_edges))


def test_edge_id_bijection(rng):
    lat = enumerate_lattice(Aabb([0, 0, 0], [1, 0.5, 0.25]), 8)
    ids = np.arange(lat.n_edges)
    v, axis = lat.edge_vertex(ids)
    np.testing.assert_array_equal(lat.edge_id(v, axis), ids)
    with pytest.raises(GeometryError):
        lat.edge_id(np.array([[lat.dims[0], 0, 0]]), 0)


def test_adjacent_cubes_share_four_edges():
    lat = enumerate_lattice(UNIT, 4)
    for step in np.eye(3, dtype=np.int64):
        ce = lat.cube_edge_ids(np.array([[2, 2, 2], [2, 2, 2] + step]))
        assert len(set(ce[0]) & set(ce[1])) == 4
    diag = lat.cube_edge_ids(np.array([[2, 2, 2], [3, 3, 2]]))
    assert len(set(diag[0]) & set(diag[1])) == 1


def test_canonical_endpoints(rng):
    lat = enumerate_lattice(UNIT, 8)
    ids = rng.choice(lat.n_edges, 500, replace=False)
    a, b = lat.edge_points(ids)
    d = b - a
    np.testing.assert_allclose(np.linalg.norm(d, axis=1), lat.cell, atol=1e-9)
    assert np.all(d >= 0)
    # the same vertex seen from two edges has bit-identical coordinates
    ex = lat.edge_id(np.array([[3, 3, 3]]), 0)
    ey = lat.edge_id(np.array([[3, 3, 3]]), 1)
    np.testing.assert_array_equal(lat.edge_points(ex)[0], lat.edge_points(ey)[0])
    ex2 = lat.edge_id(np.array([[2, 3, 3]]), 0)
    np.testing.assert_array_equal(lat.edge_points(ex2)[1], lat.edge_points(ex)[0])


def test_active_cubes_dilation():
    lat = enumerate_lattice(UNIT, 4)
    centre = lat.vertex_position([4, 4, 4]) + 0.5 * lat.cell
    cloud = PointCloud(centre[None])
    assert active_cubes(lat, cloud, 0).shape == (1, 3)
    assert active_cubes(lat, cloud, 1).shape == (27, 3)


def test_active_cubes_cover_sphere_crossings():
    shape = Sphere(0.4)
    cloud = sphere_cloud()
    lat = enumerate_lattice(cloud.bbox, 64)
    cubes = lat.all_cubes()
    ids = lat.cube_edge_ids(cubes)
    a, b = lat.edge_points(ids.ravel())
    same, _ = shape.label_pairs(a, b)
    crossing_cubes = cubes[~same.reshape(ids.shape).all(axis=1)]
    assert crossing_cubes.shape[0] > 1000
    active = {tuple(c) for c in active_cubes(lat, cloud, 3).tolist()}
    assert all(tuple(c) in active for c in crossing_cubes.tolist())
