"""Chamfer-L1, normal consistency, and the lattice intersection-distance diagnostic."""

import time
from dataclasses import asdict, dataclass

import numpy as np

from gridmesh.geometry import PointCloud, SpatialIndex, TriangleMesh, sample_surface_points

DESK_SAMPLES = 20000


class MetricError(ValueError):
    pass


def _matches(src, dst, workers=1):
    """Index into ``dst`` of the Euclidean nearest neighbour of every ``src`` point."""
    idx, _ = SpatialIndex(dst.points, workers=workers).nearest(src.points)
    return idx


def chamfer_l1(gt, rec, workers=1):
    """Symmetric CD1: nearest neighbours by Euclidean distance, L1 displacement summand.

    Each direction is averaged over its own point count and weighted 1/2.
    """
    fwd = np.abs(gt.points - rec.points[_matches(gt, rec, workers)]).sum(axis=1)
    bwd = np.abs(rec.points - gt.points[_matches(rec, gt, workers)]).sum(axis=1)
    return float(0.5 * fwd.mean() + 0.5 * bwd.mean())


def normal_consistency(gt, rec, workers=1):
    """Symmetric mean of ``|<n(x), n(S(x))>|``; unoriented, so in [0, 1]."""
    if gt.normals is None or rec.normals is None:
        raise MetricError("normals required")
    fwd = np.abs((gt.normals * rec.normals[_matches(gt, rec, workers)]).sum(axis=1))
    bwd = np.abs((rec.normals * gt.normals[_matches(rec, gt, workers)]).sum(axis=1))
    return float(np.clip(0.5 * fwd.mean() + 0.5 * bwd.mean(), 0.0, 1.0))


def intersection_distance(pred, gt, lattice):
    """Mean ``|alpha_pred - alpha_gt| * |b - a|`` in lattice cells over edges both call crossing.

    For a shape normalised to the unit box this is the distance times the
    resolution.
    """
    common = np.intersect1d(pred.ids[pred.crossing], gt.ids[gt.crossing], assume_unique=True)
    if common.size == 0:
        raise MetricError("no comparable edges")
    a, b = lattice.edge_points(common)
    length = np.linalg.norm(b - a, axis=1)
    diff = np.abs(pred.alpha_of(common) - gt.alpha_of(common))
    return float(np.mean(diff * length / lattice.cell))


@dataclass
class EvalReport:
    cd1: float
    nc: float
    n_samples: int
    seed: int
    seconds: float
    intersection_distance: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.nc <= 1.0) or self.cd1 < 0:
            raise MetricError("metric values out of range")

    def to_dict(self):
        return asdict(self)


def sample_reference(gt, n_samples, seed):
    if isinstance(gt, PointCloud):
        return gt
    if isinstance(gt, TriangleMesh):
        return sample_surface_points(gt, n_samples, seed)
    return gt.sample_surface(n_samples, seed)


def evaluate(rec_mesh, gt, n_samples=DESK_SAMPLES, seed=0, workers=1):
    """CD1 and NC between a reconstruction and a reference shape, mesh, or cloud.

    Both sides are sampled with the same seed.
    """
    if rec_mesh.n_triangles == 0:
        raise MetricError("reconstructed mesh is empty")
    t0 = time.perf_counter()
    ref = sample_reference(gt, n_samples, seed)
    rec = sample_surface_points(rec_mesh, n_samples, seed)
    cd1 = chamfer_l1(ref, rec, workers)
    nc = normal_consistency(ref, rec, workers)
    return EvalReport(cd1, nc, n_samples, seed, time.perf_counter() - t0)
