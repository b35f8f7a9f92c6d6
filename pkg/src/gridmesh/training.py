"""Losses, the cosine-scheduled Adam training loop, and a finite-difference checker."""

import json
import math
import os
import time
from dataclasses import asdict, dataclass

import numpy as np
import torch

from gridmesh.model import (
    GridNet,
    ModelConfig,
    flat_gradient,
    flat_parameters,
    parameter_table,
    prepare_cloud,
    save_checkpoint,
    set_flat_parameters,
)
from gridmesh.sampler import DESK_RESOLUTION, sample_training_pairs

PROB_CLAMP = (1e-7, 1.0 - 1e-7)
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


class TrainingDivergence(FloatingPointError):
    def __init__(self, step, lr, grad_norm, loss):
        super().__init__(
            f"non-finite loss {loss} at step {step} (lr={lr:.3e}, grad_norm={grad_norm:.3e})"
        )
        self.step = step
        self.lr = lr
        self.grad_norm = grad_norm


@dataclass(frozen=True)
class TrainConfig:
    pairs_per_iter: int = 4000
    epochs: int = 20
    iters_per_epoch: int = 50
    lr0: float = 1e-3
    seed: int = 0
    sign_weight: float = 1.0
    alpha_weight: float = 1.0
    cloud_points: int = 3000
    edge_length: float = 1.0 / DESK_RESOLUTION
    heldout_pairs: int = 4000
    dim: int = 64

    def __post_init__(self):
        for name in ("pairs_per_iter", "epochs", "iters_per_epoch", "cloud_points", "heldout_pairs", "dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not self.lr0 > 0:
            raise ValueError("lr0 must be positive")
        if not self.edge_length > 0:
            raise ValueError("edge_length must be positive")

    @property
    def total_steps(self):
        return self.epochs * self.iters_per_epoch


def loss_sign(p_pred, same_side):
    """Mean binary cross-entropy of same-side probabilities."""
    p = torch.clamp(p_pred, *PROB_CLAMP)
    y = torch.as_tensor(np.asarray(same_side, dtype=np.float64), dtype=p.dtype)
    return -(y * torch.log(p) + (1.0 - y) * torch.log1p(-p)).mean()


def loss_alpha(alpha_pred, alpha_gt):
    """Sum of ``|alpha - alpha_gt|`` over pairs with a ground truth in [0, 1].

    Entries with no crossing (NaN, None, or outside [0, 1]) contribute 0 to
    the value and 0 to the gradient. The gradient at the kink is 0.
    """
    gt = np.array([np.nan if g is None else g for g in np.asarray(alpha_gt, dtype=object).ravel()], dtype=np.float64)
    valid = np.isfinite(gt) & (gt >= 0.0) & (gt <= 1.0)
    mask = torch.as_tensor(valid)
    target = torch.as_tensor(np.where(valid, gt, 0.0), dtype=alpha_pred.dtype)
    diff = torch.where(mask, alpha_pred - target, torch.zeros_like(alpha_pred))
    return diff.abs().sum()


def cosine_lr(step, total, lr0):
    """Per-step cosine schedule: ``lr0 * 0.5 * (1 + cos(pi * t / T))``."""
    t = min(max(step, 0), total)
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * t / total))


def pair_losses(model, field, batch, config):
    prob, alpha = model.forward_pairs(field, batch.a, batch.b)
    ls = loss_sign(prob, batch.same_side)
    la = loss_alpha(alpha, batch.alpha)
    total = config.sign_weight * ls + config.alpha_weight * la
    return total, ls, la, prob, alpha


def backward(model, cloud, batch, config):
    """Flat gradient of the weighted loss with respect to every parameter."""
    model.zero_grad(set_to_none=True)
    field = model.encode(cloud)
    total, *_ = pair_losses(model, field, batch, config)
    total.backward()
    return total.detach(), flat_gradient(model)


def finite_difference_check(model, cloud, batch, config, h=1e-4, indices=None):
    """Central differences vs autograd on selected flat indices.

    Returns ``{segment: max relative error}``. The model should be float64.
    """
    _, grad = backward(model, cloud, batch, config)
    base = flat_parameters(model).clone()
    table = parameter_table(model)
    if indices is None:
        indices = np.arange(base.numel())
    seg_of = np.empty(base.numel(), dtype=object)
    for _, seg, s, e, _ in table:
        seg_of[s:e] = seg

    def loss_at(theta):
        set_flat_parameters(model, theta)
        with torch.no_grad():
            field = model.encode(cloud)
            return float(pair_losses(model, field, batch, config)[0])

    worst = {}
    try:
        for i in indices:
            plus = base.clone()
            plus[i] += h
            minus = base.clone()
            minus[i] -= h
            fd = (loss_at(plus) - loss_at(minus)) / (2 * h)
            an = float(grad[i])
            rel = abs(fd - an) / max(abs(fd), abs(an), 1e-6)
            seg = seg_of[i]
            worst[seg] = max(worst.get(seg, 0.0), rel)
    finally:
        set_flat_parameters(model, base)
    return worst


def make_optimizer(model, lr0):
    return torch.optim.Adam(model.parameters(), lr=lr0, betas=ADAM_BETAS, eps=ADAM_EPS)


def _stream(seed, *tags):
    return int(np.random.SeedSequence([seed, *tags]).generate_state(1)[0])


@dataclass
class ShapeData:
    shape: object
    cloud: object
    prepared: object
    heldout: object


def prepare_shapes(shapes, config, workers=1):
    data = []
    for i, shape in enumerate(shapes):
        cloud = shape.sample_surface(config.cloud_points, _stream(config.seed, 1, i))
        held = sample_training_pairs(
            cloud, shape, config.heldout_pairs, _stream(config.seed, 2, i), config.edge_length
        )
        data.append(ShapeData(shape, cloud, prepare_cloud(cloud, workers=workers), held))
    return data


def evaluate_pairs(model, prepared, batch):
    """Sign accuracy and mean ``|alpha - alpha_gt|`` over crossing pairs."""
    with torch.no_grad():
        field = model.encode(prepared)
        prob, alpha = model.forward_pairs(field, batch.a, batch.b)
    pred_same = prob.double().numpy() >= 0.5
    acc = float(np.mean(pred_same == batch.same_side))
    cross = ~batch.same_side
    err = float(np.mean(np.abs(alpha.double().numpy()[cross] - batch.alpha[cross]))) if cross.any() else float("nan")
    return acc, err


def antisymmetry_error(model, prepared, batch, count=256):
    with torch.no_grad():
        field = model.encode(prepared)
        _, ab = model.forward_pairs(field, batch.a[:count], batch.b[:count])
        _, ba = model.forward_pairs(field, batch.b[:count], batch.a[:count])
    return float((ab + ba - 1.0).abs().max())


def train(shapes, config=None, out_dir=None, log=None, model_config=None):
    """Train on oracle shapes; returns ``(model, records)``.

    One shape per step, cycling through ``shapes``. Pairs are redrawn every
    step from a seed stream derived from ``config.seed``. With ``out_dir``,
    a checkpoint is written after every epoch and the per-epoch records go
    to ``train_log.jsonl``.
    """
    config = config or TrainConfig()
    if not shapes:
        raise ValueError("at least one shape is required")
    torch.manual_seed(config.seed)
    mcfg = model_config or ModelConfig(dim=config.dim, seed=config.seed)
    model = GridNet(mcfg)
    opt = make_optimizer(model, config.lr0)
    data = prepare_shapes(shapes, config)
    total = config.total_steps
    records = []
    log_fh = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        log_fh = open(os.path.join(out_dir, "train_log.jsonl"), "w")
    step = 0
    try:
        for epoch in range(config.epochs):
            t0 = time.perf_counter()
            sums = np.zeros(3)
            for _ in range(config.iters_per_epoch):
                k = step % len(data)
                sd = data[k]
                batch = sample_training_pairs(
                    sd.cloud, sd.shape, config.pairs_per_iter, _stream(config.seed, 3, step), config.edge_length
                )
                lr = cosine_lr(step, total, config.lr0)
                for group in opt.param_groups:
                    group["lr"] = lr
                opt.zero_grad(set_to_none=True)
                field = model.encode(sd.prepared)
                loss, ls, la, _, _ = pair_losses(model, field, batch, config)
                loss.backward()
                if not torch.isfinite(loss):
                    gn = float(torch.linalg.vector_norm(flat_gradient(model)))
                    raise TrainingDivergence(step, lr, gn, loss.item())
                opt.step()
                sums += (loss.item(), ls.item(), la.item() / len(batch))
                step += 1
            accs, errs = zip(*(evaluate_pairs(model, sd.prepared, sd.heldout) for sd in data))
            rec = {
                "epoch": epoch + 1,
                "step": step,
                "loss": sums[0] / config.iters_per_epoch,
                "loss_sign": sums[1] / config.iters_per_epoch,
                "loss_alpha_per_pair": sums[2] / config.iters_per_epoch,
                "sign_accuracy": float(np.mean(accs)),
                "alpha_error": float(np.nanmean(errs)),
                "lr": cosine_lr(step, total, config.lr0),
                "antisymmetry": antisymmetry_error(model, data[0].prepared, data[0].heldout),
                "seconds": time.perf_counter() - t0,
            }
            records.append(rec)
            if log is not None:
                log(rec)
            if out_dir is not None:
                log_fh.write(json.dumps(rec) + "\n")
                log_fh.flush()
                save_checkpoint(os.path.join(out_dir, f"epoch_{epoch + 1:03d}.json"), model, asdict(config))
        if out_dir is not None:
            save_checkpoint(os.path.join(out_dir, "model.json"), model, asdict(config))
    finally:
        if log_fh is not None:
            log_fh.close()
    model.eval()
    return model, records
