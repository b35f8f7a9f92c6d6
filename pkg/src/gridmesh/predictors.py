"""Pluggable pair predictors consumed by the mesher.

A predictor answers two vectorised questions about point pairs ``(a, b)``:
the probability that both points lie on the same side of the surface, and
the crossing parameter ``alpha`` of the surface along ``a -> b``.
"""

from typing import Protocol

import numpy as np

from gridmesh.oracle import OnSurfaceError

# Fixed nudge direction for lattice vertices that land exactly on a surface.
_NUDGE_DIR = np.array([0.2672612419124244, 0.5345224838248488, 0.8017837257372732])


class Predictor(Protocol):
    def same_side_prob(self, a: np.ndarray, b: np.ndarray) -> np.ndarray: ...

    def alpha(self, a: np.ndarray, b: np.ndarray) -> np.ndarray: ...


class OraclePredictor:
    """Exact labels from a ground-truth shape.

    Endpoints lying exactly on the surface are nudged by ``nudge`` along a
    fixed direction. The nudge depends only on the point, so every edge
    sharing a lattice vertex sees the same perturbed vertex.
    """

    def __init__(self, shape, nudge=1e-9):
        self.shape = shape
        self.nudge = nudge

    def _labels(self, a, b):
        a = np.array(a, dtype=np.float64)
        b = np.array(b, dtype=np.float64)
        for _ in range(8):
            try:
                return self.shape.label_pairs(a, b)
            except OnSurfaceError as err:
                rows = err.rows
                for pts in (a, b):
                    on = rows[self.shape.udf(pts[rows]) == 0.0]
                    pts[on] += self.nudge * _NUDGE_DIR
        return self.shape.label_pairs(a, b)

    def same_side_prob(self, a, b):
        same, _ = self._labels(a, b)
        return same.astype(np.float64)

    def alpha(self, a, b):
        same, alpha = self._labels(a, b)
        return np.where(same, 0.5, alpha)


class RandomAlphaPredictor:
    """Ground-truth signs with alpha drawn uniformly from (0, 1).

    One draw per queried pair, in query order; the mesher queries each
    canonical edge once, so the draw is per edge rather than per cube.
    """

    def __init__(self, base, seed):
        self.base = base
        self.rng = np.random.default_rng(seed)

    def same_side_prob(self, a, b):
        return self.base.same_side_prob(a, b)

    def alpha(self, a, b):
        return self.rng.uniform(0.0, 1.0, np.asarray(a).shape[0])


class UdfRatioPredictor:
    """Ground-truth signs with ``alpha = udf(a) / (udf(a) + udf(b))``."""

    def __init__(self, shape, base=None):
        self.shape = shape
        self.base = base if base is not None else OraclePredictor(shape)

    def same_side_prob(self, a, b):
        return self.base.same_side_prob(a, b)

    def alpha(self, a, b):
        ua = self.shape.udf(a)
        ub = self.shape.udf(b)
        total = ua + ub
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(total > 0, ua / total, 0.5)
