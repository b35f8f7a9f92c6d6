import hashlib

import numpy as np

from gridmesh.mc_table import TABLE_SHA256, TRI_TABLE
from gridmesh.sampler import CUBE_EDGES


def crossing_edges(config):
    bits = (config >> np.arange(8)) & 1
    return set(np.nonzero(bits[CUBE_EDGES[:, 0]] != bits[CUBE_EDGES[:, 1]])[0].tolist())


def rows():
    for c in range(256):
        row = TRI_TABLE[c]
        used = row[row >= 0]
        yield c, used


def test_shape_and_checksum():
    assert TRI_TABLE.shape == (256, 16)
    assert not TRI_TABLE.flags.writeable
    assert hashlib.sha256(TRI_TABLE.tobytes()).hexdigest() == TABLE_SHA256


def test_empty_extremes_and_index_range():
    assert np.all(TRI_TABLE[0] == -1) and np.all(TRI_TABLE[255] == -1)
    for _, used in rows():
        assert used.size % 3 == 0
        assert np.all((used >= 0) & (used < 12))


def test_rows_are_prefix_terminated():
    for c in range(256):
        row = TRI_TABLE[c]
        n = int(np.sum(row >= 0))
        assert np.all(row[:n] >= 0) and np.all(row[n:] == -1)


def test_uses_exactly_the_crossing_edges():
    for c, used in rows():
        assert set(used.tolist()) == crossing_edges(c)


def test_complement_triangulates_same_edges():
    for c, used in rows():
        other = TRI_TABLE[255 - c]
        assert set(used.tolist()) == set(other[other >= 0].tolist())


def test_patch_edges_used_at_most_twice():
    # inside one cube every triangle edge is shared by at most two triangles
    for _, used in rows():
        tris = used.reshape(-1, 3)
        edges = np.sort(np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        assert counts.max(initial=0) <= 2
        assert np.all(tris[:, 0] != tris[:, 1]) and np.all(tris[:, 1] != tris[:, 2]) and np.all(tris[:, 0] != tris[:, 2])
