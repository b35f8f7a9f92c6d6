"""Mesh and point-cloud file formats: OBJ, PLY (ASCII and binary), XYZ."""

import os

import numpy as np

from gridmesh.geometry import PointCloud, TriangleMesh


class MeshIOError(ValueError):
    pass


def _ext(path):
    return os.path.splitext(str(path))[1].lower()


def read_obj(path):
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = []
                for tok in parts[1:]:
                    i = int(tok.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                for j in range(1, len(idx) - 1):
                    faces.append((idx[0], idx[j], idx[j + 1]))
    if not verts:
        raise MeshIOError(f"{path}: no vertices")
    return TriangleMesh(np.array(verts), np.array(faces, dtype=np.int64).reshape(-1, 3))


def write_obj(path, mesh):
    with open(path, "w") as fh:
        for x, y, z in mesh.vertices.tolist():
            fh.write(f"v {x!r} {y!r} {z!r}\n")
        for a, b, c in mesh.triangles + 1:
            fh.write(f"f {a} {b} {c}\n")


_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _read_ply_header(fh):
    if fh.readline().strip() != b"ply":
        raise MeshIOError("not a PLY file")
    fmt = None
    elements = []
    while True:
        line = fh.readline()
        if not line:
            raise MeshIOError("truncated PLY header")
        parts = line.decode("ascii").split()
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if parts[1] == "list":
                elements[-1][2].append((parts[4], ("list", parts[2], parts[3])))
            else:
                elements[-1][2].append((parts[2], parts[1]))
        elif parts[0] == "end_header":
            break
    return fmt, elements


def _read_ply_elements(path):
    with open(path, "rb") as fh:
        fmt, elements = _read_ply_header(fh)
        data = {}
        if fmt == "ascii":
            tokens = iter(fh.read().decode("ascii").split())
            for name, count, props in elements:
                rows = []
                for _ in range(count):
                    row = {}
                    for pname, ptype in props:
                        if isinstance(ptype, tuple):
                            n = int(next(tokens))
                            row[pname] = [int(float(next(tokens))) for _ in range(n)]
                        else:
                            row[pname] = float(next(tokens))
                    rows.append(row)
                data[name] = rows
            return data
        if fmt not in ("binary_little_endian", "binary_big_endian"):
            raise MeshIOError(f"unsupported PLY format {fmt!r}")
        bo = "<" if fmt == "binary_little_endian" else ">"
        buf = fh.read()
        off = 0
        for name, count, props in elements:
            if not any(isinstance(t, tuple) for _, t in props):
                dt = np.dtype([(p, bo + _PLY_TYPES[t]) for p, t in props])
                arr = np.frombuffer(buf, dtype=dt, count=count, offset=off)
                off += dt.itemsize * count
                data[name] = arr
                continue
            if len(props) == 1 and count:
                pname, (_, cty, ity) = props[0]
                dt = np.dtype([("n", bo + _PLY_TYPES[cty]), ("i", bo + _PLY_TYPES[ity], 3)])
                if off + dt.itemsize * count <= len(buf):
                    arr = np.frombuffer(buf, dtype=dt, count=count, offset=off)
                    if np.all(arr["n"] == 3):
                        off += dt.itemsize * count
                        data[name] = [{pname: r} for r in arr["i"].astype(np.int64).tolist()]
                        continue
            rows = []
            for _ in range(count):
                row = {}
                for pname, ptype in props:
                    if isinstance(ptype, tuple):
                        ct = np.dtype(bo + _PLY_TYPES[ptype[1]])
                        it = np.dtype(bo + _PLY_TYPES[ptype[2]])
                        n = int(np.frombuffer(buf, ct, 1, off)[0])
                        off += ct.itemsize
                        row[pname] = np.frombuffer(buf, it, n, off).astype(np.int64).tolist()
                        off += it.itemsize * n
                    else:
                        t = np.dtype(bo + _PLY_TYPES[ptype])
                        row[pname] = float(np.frombuffer(buf, t, 1, off)[0])
                        off += t.itemsize
                rows.append(row)
            data[name] = rows
        return data


def _column(rows, key):
    if isinstance(rows, np.ndarray):
        return np.asarray(rows[key], dtype=np.float64)
    return np.array([r[key] for r in rows], dtype=np.float64)


def _has(rows, key):
    if isinstance(rows, np.ndarray):
        return key in rows.dtype.names
    return bool(rows) and key in rows[0]


def read_ply(path):
    """Return ``(vertices, triangles, normals)``; missing parts are None."""
    data = _read_ply_elements(path)
    if "vertex" not in data:
        raise MeshIOError(f"{path}: no vertex element")
    vrows = data["vertex"]
    verts = np.stack([_column(vrows, k) for k in "xyz"], axis=1)
    normals = None
    if _has(vrows, "nx"):
        normals = np.stack([_column(vrows, k) for k in ("nx", "ny", "nz")], axis=1)
    tris = None
    if "face" in data:
        frows = data["face"]
        key = "vertex_indices" if _has(frows, "vertex_indices") else "vertex_index"
        out = []
        for r in frows:
            idx = r[key]
            for j in range(1, len(idx) - 1):
                out.append((idx[0], idx[j], idx[j + 1]))
        tris = np.array(out, dtype=np.int64).reshape(-1, 3)
    return verts, tris, normals


def write_ply(path, mesh=None, cloud=None, binary=True):
    """Write a mesh, or a point cloud (with optional normals), as PLY."""
    if (mesh is None) == (cloud is None):
        raise ValueError("pass exactly one of mesh or cloud")
    if mesh is not None:
        verts, tris, normals = mesh.vertices, mesh.triangles, None
    else:
        verts, tris, normals = cloud.points, None, cloud.normals
    fmt = "binary_little_endian" if binary else "ascii"
    header = ["ply", f"format {fmt} 1.0", f"element vertex {len(verts)}"]
    header += [f"property double {k}" for k in "xyz"]
    if normals is not None:
        header += [f"property double {k}" for k in ("nx", "ny", "nz")]
    if tris is not None:
        header += [f"element face {len(tris)}", "property list uchar int vertex_indices"]
    header.append("end_header")
    cols = verts if normals is None else np.hstack([verts, normals])
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(np.ascontiguousarray(cols, dtype="<f8").tobytes())
            if tris is not None:
                rec = np.zeros(len(tris), dtype=[("n", "u1"), ("i", "<i4", 3)])
                rec["n"] = 3
                rec["i"] = tris
                fh.write(rec.tobytes())
        else:
            for row in cols:
                fh.write((" ".join(repr(float(x)) for x in row) + "\n").encode("ascii"))
            if tris is not None:
                for a, b, c in tris:
                    fh.write(f"3 {a} {b} {c}\n".encode("ascii"))


def read_xyz(path):
    arr = np.loadtxt(path, dtype=np.float64, ndmin=2)
    if arr.shape[1] not in (3, 6):
        raise MeshIOError(f"{path}: expected 3 or 6 columns, got {arr.shape[1]}")
    normals = arr[:, 3:6] if arr.shape[1] == 6 else None
    if normals is not None:
        normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    return PointCloud(arr[:, :3], normals)


def write_xyz(path, cloud):
    cols = cloud.points if cloud.normals is None else np.hstack([cloud.points, cloud.normals])
    np.savetxt(path, cols, fmt="%.17g")


def load_mesh(path):
    ext = _ext(path)
    if ext == ".obj":
        return read_obj(path)
    if ext == ".ply":
        verts, tris, _ = read_ply(path)
        if tris is None:
            raise MeshIOError(f"{path}: PLY has no faces")
        return TriangleMesh(verts, tris)
    raise MeshIOError(f"unsupported mesh format {ext!r}")


def save_mesh(path, mesh):
    ext = _ext(path)
    if ext == ".obj":
        write_obj(path, mesh)
    elif ext == ".ply":
        write_ply(path, mesh=mesh)
    else:
        raise MeshIOError(f"unsupported mesh format {ext!r}")


def load_cloud(path):
    ext = _ext(path)
    if ext == ".xyz":
        return read_xyz(path)
    if ext == ".ply":
        verts, _, normals = read_ply(path)
        if normals is not None:
            normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
        return PointCloud(verts, normals)
    if ext == ".obj":
        return PointCloud(read_obj(path).vertices)
    raise MeshIOError(f"unsupported point cloud format {ext!r}")


def save_cloud(path, cloud):
    ext = _ext(path)
    if ext == ".xyz":
        write_xyz(path, cloud)
    elif ext == ".ply":
        write_ply(path, cloud=cloud)
    else:
        raise MeshIOError(f"unsupported point cloud format {ext!r}")

