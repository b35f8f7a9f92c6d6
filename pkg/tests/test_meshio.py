import numpy as np
import pytest

from gridmesh.geometry import PointCloud, TriangleMesh, icosphere
from gridmesh.meshio import (
    MeshIOError,
    load_cloud,
    load_mesh,
    read_obj,
    read_ply,
    save_cloud,
    save_mesh,
    write_ply,
)


@pytest.mark.parametrize("ext", [".obj", ".ply"])
def test_mesh_roundtrip_exact(tmp_path, ext):
    m = icosphere(2, radius=0.37)
    path = tmp_path / f"m{ext}"
    save_mesh(path, m)
    back = load_mesh(path)
    np.testing.assert_array_equal(back.vertices, m.vertices)
    np.testing.assert_array_equal(back.triangles, m.triangles)


def test_ascii_ply_roundtrip(tmp_path):
    m = icosphere(1)
    path = tmp_path / "a.ply"
    write_ply(path, mesh=m, binary=False)
    assert b"format ascii" in path.read_bytes()[:100]
    back = load_mesh(path)
    np.testing.assert_array_equal(back.vertices, m.vertices)
    np.testing.assert_array_equal(back.triangles, m.triangles)


def test_big_endian_float_ply_with_quads(tmp_path):
    verts = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=">f4")
    header = (
        "ply\nformat binary_big_endian 1.0\ncomment made by hand\n"
        "element vertex 4\nproperty float x\nproperty float y\nproperty float z\n"
        "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
    )
    body = verts.tobytes() + np.array([4], ">u1").tobytes() + np.array([0, 1, 2, 3], ">i4").tobytes()
    path = tmp_path / "q.ply"
    path.write_bytes(header.encode() + body)
    m = load_mesh(path)
    np.testing.assert_array_equal(m.triangles, [[0, 1, 2], [0, 2, 3]])
    np.testing.assert_array_equal(m.vertices, verts.astype(float))


def test_obj_with_slashes_and_negative_indices(tmp_path):
    path = tmp_path / "s.obj"
    path.write_text(
        "# comment\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\n"
        "f 1//1 2//1 3//1\nf -4/1/1 -2/1/1 -1/1/1\n"
    )
    m = read_obj(path)
    np.testing.assert_array_equal(m.triangles, [[0, 1, 2], [0, 2, 3]])


def test_obj_without_vertices(tmp_path):
    path = tmp_path / "e.obj"
    path.write_text("# nothing\n")
    with pytest.raises(MeshIOError):
        read_obj(path)


@pytest.mark.parametrize("ext", [".xyz", ".ply"])
def test_cloud_roundtrip(tmp_path, ext, rng):
    pts = rng.random((50, 3))
    n = rng.normal(size=(50, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    path = tmp_path / f"c{ext}"
    save_cloud(path, PointCloud(pts, n))
    back = load_cloud(path)
    np.testing.assert_array_equal(back.points, pts)
    np.testing.assert_allclose(back.normals, n, atol=1e-15)


def test_xyz_points_only(tmp_path):
    path = tmp_path / "p.xyz"
    path.write_text("0 0 0\n1 2 3\n")
    c = load_cloud(path)
    assert c.normals is None and len(c) == 2


def test_bad_inputs(tmp_path):
    bad = tmp_path / "b.xyz"
    bad.write_text("1 2\n3 4\n")
    with pytest.raises(MeshIOError):
        load_cloud(bad)
    with pytest.raises(MeshIOError):
        load_mesh(tmp_path / "x.stl")
    notply = tmp_path / "n.ply"
    notply.write_bytes(b"hello\n")
    with pytest.raises(MeshIOError):
        read_ply(notply)
    cloud_only = tmp_path / "c.ply"
    write_ply(cloud_only, cloud=PointCloud(np.zeros((2, 3))))
    with pytest.raises(MeshIOError):
        load_mesh(cloud_only)
    with pytest.raises(FileNotFoundError):
        load_mesh(tmp_path / "missing.obj")


def test_write_ply_needs_one_payload(tmp_path):
    with pytest.raises(ValueError):
        write_ply(tmp_path / "x.ply")
    m = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    with pytest.raises(ValueError):
        write_ply(tmp_path / "x.ply", mesh=m, cloud=PointCloud([[0, 0, 0]]))
