"""Ground-truth shapes that label point pairs with relative sign and crossing parameter."""

from dataclasses import dataclass

import numpy as np

from gridmesh import kernels
from gridmesh.geometry import (
    Aabb,
    GeometryError,
    PointCloud,
    as_points,
    edge_use_counts,
    sample_surface_points,
    segments_mesh_hits,
)

BISECTION_ITERS = 60
BISECTION_WIDTH = 1e-15


class OnSurfaceError(GeometryError):
    """An endpoint lies exactly on the surface; the caller should resample."""

    def __init__(self, rows):
        self.rows = np.asarray(rows, dtype=np.int64)
        super().__init__(f"on-surface endpoint ({self.rows.size} pair(s))")


class NoSignError(GeometryError):
    def __init__(self, kind):
        super().__init__(f"no sign available for open shape kind {kind!r}")


@dataclass(frozen=True)
class PairLabel:
    same_side: bool
    alpha: float | None

    def __post_init__(self):
        if self.same_side and self.alpha is not None:
            raise ValueError("same-side pairs carry no crossing parameter")
        if not self.same_side and not (self.alpha is not None and 0.0 <= self.alpha <= 1.0):
            raise ValueError("crossing pairs need alpha in [0, 1]")


class ImplicitShape:
    kind = "abstract"
    watertight = True

    def udf(self, points):
        return np.abs(self.sdf(points))

    def sdf(self, points):
        raise NoSignError(self.kind)

    def bbox(self):
        raise NotImplementedError

    def sample_surface(self, count, seed):
        raise NotImplementedError

    def label_pairs(self, a, b):
        """Vectorised labels: ``(same_side, alpha)`` with alpha NaN where no crossing."""
        a = as_points(a)
        b = as_points(b)
        return self._label_signed(a, b)

    def label_pair(self, a, b):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if np.array_equal(a, b):
            raise GeometryError("degenerate pair")
        same, alpha = self.label_pairs(a[None], b[None])
        return PairLabel(bool(same[0]), None if same[0] else float(alpha[0]))

    def _label_signed(self, a, b):
        fa = self.sdf(a)
        fb = self.sdf(b)
        bad = np.nonzero((fa == 0.0) | (fb == 0.0))[0]
        if bad.size:
            raise OnSurfaceError(bad)
        same = np.sign(fa) == np.sign(fb)
        alpha = np.full(a.shape[0], np.nan)
        rows = np.nonzero(~same)[0]
        if rows.size:
            alpha[rows] = self._bisect(a[rows], b[rows], fa[rows])
        return same, alpha

    def _bisect(self, a, b, fa):
        d = b - a
        lo = np.zeros(a.shape[0])
        hi = np.ones(a.shape[0])
        sa = np.sign(fa)
        for _ in range(BISECTION_ITERS):
            if np.all(hi - lo <= BISECTION_WIDTH):
                break
            mid = 0.5 * (lo + hi)
            fm = self.sdf(a + mid[:, None] * d)
            exact = fm == 0.0
            lo = np.where(exact, mid, lo)
            hi = np.where(exact, mid, hi)
            left = ~exact & (np.sign(fm) == sa)
            lo = np.where(left, mid, lo)
            hi = np.where(~exact & ~left, mid, hi)
        return 0.5 * (lo + hi)


class Sphere(ImplicitShape):
    kind = "sphere"

    def __init__(self, radius=0.4, center=(0.0, 0.0, 0.0)):
        if radius <= 0:
            raise GeometryError("radius must be positive")
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=np.float64)

    def params(self):
        return {"radius": self.radius, "center": self.center.tolist()}

    def sdf(self, points):
        return np.linalg.norm(as_points(points) - self.center, axis=1) - self.radius

    def bbox(self):
        return Aabb(self.center - self.radius, self.center + self.radius)

    def sample_surface(self, count, seed):
        rng = np.random.default_rng(seed)
        n = rng.standard_normal((count, 3))
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        return PointCloud(self.center + self.radius * n, n)


class Torus(ImplicitShape):
    """Torus around the z axis through ``center``."""

    kind = "torus"

    def __init__(self, major=0.3, minor=0.12, center=(0.0, 0.0, 0.0)):
        if not 0 < minor < major:
            raise GeometryError("torus needs 0 < minor < major")
        self.major = float(major)
        self.minor = float(minor)
        self.center = np.asarray(center, dtype=np.float64)

    def params(self):
        return {"R": self.major, "r": self.minor, "center": self.center.tolist()}

    def sdf(self, points):
        p = as_points(points) - self.center
        q = np.hypot(p[:, 0], p[:, 1]) - self.major
        return np.hypot(q, p[:, 2]) - self.minor

    def bbox(self):
        e = np.array([self.major + self.minor] * 2 + [self.minor])
        return Aabb(self.center - e, self.center + e)

    def sample_surface(self, count, seed):
        rng = np.random.default_rng(seed)
        R, r = self.major, self.minor
        u_out, v_out = [], []
        have = 0
        while have < count:
            u = rng.uniform(0, 2 * np.pi, 2 * count)
            v = rng.uniform(0, 2 * np.pi, 2 * count)
            keep = rng.random(2 * count) < (R + r * np.cos(v)) / (R + r)
            u_out.append(u[keep])
            v_out.append(v[keep])
            have += int(keep.sum())
        u = np.concatenate(u_out)[:count]
        v = np.concatenate(v_out)[:count]
        n = np.stack([np.cos(v) * np.cos(u), np.cos(v) * np.sin(u), np.sin(v)], axis=1)
        ring = np.stack([R * np.cos(u), R * np.sin(u), np.zeros_like(u)], axis=1)
        return PointCloud(self.center + ring + r * n, n)


class Box(ImplicitShape):
    kind = "box"

    def __init__(self, half_extents=(0.3, 0.25, 0.2), center=(0.0, 0.0, 0.0)):
        self.half = np.asarray(half_extents, dtype=np.float64)
        if np.any(self.half <= 0):
            raise GeometryError("half extents must be positive")
        self.center = np.asarray(center, dtype=np.float64)

    def params(self):
        return {"half_extents": self.half.tolist(), "center": self.center.tolist()}

    def sdf(self, points):
        q = np.abs(as_points(points) - self.center) - self.half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        return outside + inside

    def bbox(self):
        return Aabb(self.center - self.half, self.center + self.half)

    def sample_surface(self, count, seed):
        rng = np.random.default_rng(seed)
        h = self.half
        # faces ordered -x, +x, -y, +y, -z, +z
        area = np.repeat([h[1] * h[2], h[0] * h[2], h[0] * h[1]], 2)
        face = rng.choice(6, size=count, p=area / area.sum())
        pts = rng.uniform(-1.0, 1.0, (count, 3)) * h
        axis = face // 2
        side = np.where(face % 2 == 0, -1.0, 1.0)
        pts[np.arange(count), axis] = side * h[axis]
        n = np.zeros((count, 3))
        n[np.arange(count), axis] = side
        return PointCloud(self.center + pts, n)


class OpenDisk(ImplicitShape):
    """Flat disk in the plane z = center_z; an open surface with a rim."""

    kind = "open-disk"
    watertight = False

    def __init__(self, radius=0.4, center=(0.0, 0.0, 0.0)):
        if radius <= 0:
            raise GeometryError("radius must be positive")
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=np.float64)

    def params(self):
        return {"radius": self.radius, "center": self.center.tolist()}

    def udf(self, points):
        p = as_points(points) - self.center
        rho = np.hypot(p[:, 0], p[:, 1])
        out = np.maximum(rho - self.radius, 0.0)
        return np.hypot(out, p[:, 2])

    def bbox(self):
        e = np.array([self.radius, self.radius, 0.0])
        return Aabb(self.center - e, self.center + e)

    def sample_surface(self, count, seed):
        rng = np.random.default_rng(seed)
        rho = self.radius * np.sqrt(rng.random(count))
        th = rng.uniform(0, 2 * np.pi, count)
        pts = np.stack([rho * np.cos(th), rho * np.sin(th), np.zeros(count)], axis=1)
        n = np.tile([0.0, 0.0, 1.0], (count, 1))
        return PointCloud(self.center + pts, n)

    def label_pairs(self, a, b):
        a = as_points(a) - self.center
        b = as_points(b) - self.center
        bad = np.nonzero((self.udf(a + self.center) == 0.0) | (self.udf(b + self.center) == 0.0))[0]
        if bad.size:
            raise OnSurfaceError(bad)
        za, zb = a[:, 2], b[:, 2]
        straddle = za * zb < 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            t = za / (za - zb)
            hit = a + t[:, None] * (b - a)
        crossing = straddle & (np.hypot(hit[:, 0], hit[:, 1]) <= self.radius)
        alpha = np.where(crossing, t, np.nan)
        return ~crossing, alpha


class TriangleSoup(ImplicitShape):
    """Shape given by a triangle mesh; labels come from crossing parity."""

    kind = "triangle-soup"

    def __init__(self, mesh, path=None):
        self.mesh = mesh
        self.path = path
        _, counts = edge_use_counts(mesh)
        self.watertight = bool(counts.size) and bool(np.all(counts == 2))
        self._corners = tuple(np.ascontiguousarray(c) for c in mesh.corners)

    def params(self):
        return {"path": None if self.path is None else str(self.path)}

    def udf(self, points):
        dist, _ = kernels.point_triangle_distance(as_points(points), *self._corners)
        return dist

    def sdf(self, points):
        if not self.watertight:
            raise NoSignError(self.kind)
        p = as_points(points)
        box = self.bbox()
        # Far endpoint along a fixed generic direction.
        far_dir = np.array([0.5773502691896258, 0.5345224838248488, 0.6172133998483676])
        reach = 2.0 * float(np.linalg.norm(box.extent)) + 1.0
        far = p + reach * far_dir
        hits = segments_mesh_hits(self.mesh, p, far)
        inside = np.array([len(h) % 2 == 1 for h in hits])
        return np.where(inside, -1.0, 1.0) * self.udf(p)

    def bbox(self):
        return self.mesh.bbox

    def sample_surface(self, count, seed):
        return sample_surface_points(self.mesh, count, seed)

    def label_pairs(self, a, b):
        a = as_points(a)
        b = as_points(b)
        hits = segments_mesh_hits(self.mesh, a, b)
        same = np.ones(a.shape[0], dtype=bool)
        alpha = np.full(a.shape[0], np.nan)
        bad = []
        for i, h in enumerate(hits):
            if h and (h[0][0] == 0.0 or h[-1][0] == 1.0):
                bad.append(i)
                continue
            if len(h) % 2 == 1:
                same[i] = False
                alpha[i] = h[0][0]
        if bad:
            raise OnSurfaceError(bad)
        return same, alpha


def _floats(text):
    return [float(x) for x in text.replace(";", " ").split()]


def parse_shape(spec):
    """Build a shape from ``kind[:key=value,...]``.

    Examples: ``sphere``, ``sphere:radius=0.3``, ``torus:R=0.3,r=0.1``,
    ``box:half=0.3;0.2;0.2``, ``disk:radius=0.4``, ``mesh:path=bunny.obj``.
    Vector values separate components with ``;``.
    """
    kind, _, rest = spec.partition(":")
    kv = {}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            raise ValueError(f"bad shape parameter {item!r} in {spec!r}")
        kv[key.strip()] = value.strip()

    def take(name, default, vector=False):
        if name not in kv:
            return default
        raw = kv.pop(name)
        return _floats(raw) if vector else float(raw)

    kind = kind.strip().lower()
    if kind == "sphere":
        shape = Sphere(take("radius", 0.4), take("center", (0, 0, 0), True))
    elif kind == "torus":
        shape = Torus(take("R", 0.3), take("r", 0.12), take("center", (0, 0, 0), True))
    elif kind == "box":
        shape = Box(take("half", (0.3, 0.25, 0.2), True), take("center", (0, 0, 0), True))
    elif kind in ("disk", "open-disk"):
        shape = OpenDisk(take("radius", 0.4), take("center", (0, 0, 0), True))
    elif kind in ("mesh", "triangle-soup"):
        from gridmesh.meshio import load_mesh

        if "path" not in kv:
            raise ValueError("mesh shape needs path=...")
        path = kv.pop("path")
        shape = TriangleSoup(load_mesh(path), path=path)
    else:
        raise ValueError(f"unknown shape kind {kind!r}")
    if kv:
        raise ValueError(f"unknown shape parameter(s) {sorted(kv)} for {kind}")
    return shape
