"""Diagnostic experiments: the crossing-parameter artifact study and the 2D UDF/SDF toy."""

from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from gridmesh.metrics import evaluate, intersection_distance
from gridmesh.mesher import reconstruct
from gridmesh.predictors import OraclePredictor, RandomAlphaPredictor, UdfRatioPredictor
from gridmesh.sampler import DESK_RESOLUTION, active_cubes, enumerate_lattice
from gridmesh.training import TrainingDivergence


def artifact_study(shape, resolution=DESK_RESOLUTION, seed=0, n_samples=20000, cloud_points=3000, dilation=3):
    """Mesh with ground-truth signs and three crossing-parameter sources.

    ``gt_alpha`` bisects the true crossing, ``random_alpha`` draws U(0, 1)
    once per canonical edge, and ``gifs_alpha`` uses the ratio
    ``udf(a) / (udf(a) + udf(b))``. No post-processing is applied, so the
    comparison isolates the effect of the crossing parameter.
    """
    cloud = shape.sample_surface(cloud_points, seed)
    lattice = enumerate_lattice(shape.bbox(), resolution)
    cubes = active_cubes(lattice, cloud, dilation)
    oracle = OraclePredictor(shape)
    runs = {
        "gt_alpha": oracle,
        "random_alpha": RandomAlphaPredictor(oracle, seed),
        "gifs_alpha": UdfRatioPredictor(shape, oracle),
    }
    out = {}
    gt_sol = None
    for name, predictor in runs.items():
        mesh, sol, _ = reconstruct(lattice, cubes, predictor)
        if gt_sol is None:
            gt_sol = sol
        rep = evaluate(mesh, shape, n_samples, seed)
        out[name] = {
            "cd1": rep.cd1,
            "nc": rep.nc,
            "intersection_distance": intersection_distance(sol, gt_sol, lattice),
            "triangles": int(mesh.n_triangles),
        }
    out["meta"] = {"resolution": resolution, "seed": seed, "n_samples": n_samples, "cubes": int(cubes.shape[0])}
    return out


@dataclass(frozen=True)
class Toy2dConfig:
    dims: tuple = (32, 64, 1)
    n_points: int = 20000
    lr: float = 1e-3
    steps: int = 2000
    radius: float = 1.0
    center: tuple = (0.0, 0.0)
    domain: float = 2.0
    seed: int = 0
    profile_points: int = 401
    band: tuple = (0.9, 1.1)

    def __post_init__(self):
        if any(d <= 0 for d in self.dims) or self.dims[-1] != 1:
            raise ValueError("toy MLP dims must be positive and end in 1")
        if self.n_points <= 0 or self.steps <= 0 or not self.lr > 0 or not self.radius > 0:
            raise ValueError("toy counts, lr and radius must be positive")


def circle_field(points, config, field):
    sdf = np.linalg.norm(points - np.asarray(config.center), axis=-1) - config.radius
    if field == "sdf":
        return sdf
    if field == "udf":
        return np.abs(sdf)
    raise ValueError(f"unknown field {field!r}")


class ToyMLP(nn.Module):
    def __init__(self, dims, unsigned):
        super().__init__()
        layers, prev = [], 2
        for i, d in enumerate(dims):
            layers.append(nn.Linear(prev, d))
            if i < len(dims) - 1:
                layers.append(nn.ReLU())
            prev = d
        self.net = nn.Sequential(*layers)
        self.unsigned = unsigned

    def forward(self, x):
        y = self.net(x).squeeze(-1)
        # the unsigned field only has a nonnegative range
        return y.abs() if self.unsigned else y


def fit_toy2d(config, field):
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    x = rng.uniform(-config.domain, config.domain, (config.n_points, 2))
    y = circle_field(x, config, field)
    xt = torch.tensor(x, dtype=torch.float32)
    yt = torch.tensor(y, dtype=torch.float32)
    model = ToyMLP(config.dims, unsigned=field == "udf")
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    for step in range(config.steps):
        opt.zero_grad(set_to_none=True)
        loss = ((model(xt) - yt) ** 2).mean()
        if not torch.isfinite(loss):
            gn = float(sum(p.grad.norm() ** 2 for p in model.parameters() if p.grad is not None) ** 0.5)
            raise TrainingDivergence(step, config.lr, gn, loss.item())
        loss.backward()
        opt.step()
    return model, loss.item()


def toy2d(config=None, fields=("sdf", "udf")):
    """Fit each field and report its profile along ``y = 0``."""
    config = config or Toy2dConfig()
    xs = np.linspace(-config.domain, config.domain, config.profile_points)
    line = np.stack([xs, np.zeros_like(xs)], axis=1)
    lo, hi = config.band
    band = (np.abs(xs) >= lo) & (np.abs(xs) <= hi)
    out = {"config": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(config).items()}}
    for field in fields:
        model, final = fit_toy2d(config, field)
        with torch.no_grad():
            fitted = model(torch.tensor(line, dtype=torch.float32)).double().numpy()
        gt = circle_field(line, config, field)
        err = np.abs(fitted - gt)
        out[field] = {
            "x": xs.tolist(),
            "fitted": fitted.tolist(),
            "gt": gt.tolist(),
            "abs_err": err.tolist(),
            "band_error": float(err[band].mean()),
            "final_loss": final,
        }
    return out
