import json
import math

import numpy as np
import pytest
import torch

from gridmesh import training
from gridmesh.model import GridNet, ModelConfig, parameter_table, prepare_cloud
from gridmesh.oracle import Sphere
from gridmesh.sampler import sample_training_pairs
from gridmesh.training import (
    TrainConfig,
    TrainingDivergence,
    backward,
    cosine_lr,
    finite_difference_check,
    loss_alpha,
    loss_sign,
    make_optimizer,
    train,
)

TINY = TrainConfig(pairs_per_iter=96, epochs=1, iters_per_epoch=3, cloud_points=150, heldout_pairs=96, dim=8)


def tiny_setup(n_pairs=5, dim=8, seed=0):
    shape = Sphere(0.4)
    cloud = shape.sample_surface(60, seed)
    batch = sample_training_pairs(cloud, shape, 600, seed)
    # keep a mix of crossing and non-crossing pairs
    cross = np.nonzero(~batch.same_side)[0]
    same = np.nonzero(batch.same_side)[0]
    order = np.concatenate([cross[: (n_pairs + 1) // 2], same[: n_pairs // 2]])
    sub = type(batch)(batch.a[order], batch.b[order], batch.same_side[order], batch.alpha[order])
    model = GridNet(ModelConfig(dim=dim, encoder_k=8, seed=seed, local_scale=32.0)).double()
    return model, prepare_cloud(cloud, 8), sub


def weights(sign, alpha):
    # TrainConfig rejects nothing about weights, so zero is allowed
    return TrainConfig(sign_weight=sign, alpha_weight=alpha)


def segment_slices(model, segment):
    return [(s, e) for _, seg, s, e, _ in parameter_table(model) if seg == segment]


def test_loss_alpha_examples():
    t = torch.tensor
    assert loss_alpha(t([0.7], dtype=torch.float64), [0.2]).item() == pytest.approx(0.5)
    assert loss_alpha(t([0.7]), [None]).item() == 0.0
    assert loss_alpha(t([0.3, 0.9]), [0.3, np.nan]).item() == 0.0


def test_loss_alpha_out_of_range_is_inert():
    pred = torch.tensor([0.2, 0.4, 0.6, 0.8], dtype=torch.float64, requires_grad=True)
    loss = loss_alpha(pred, [1.5, -0.2, np.nan, 0.5])
    loss.backward()
    assert loss.item() == pytest.approx(0.3)
    np.testing.assert_array_equal(pred.grad.numpy(), [0, 0, 0, 1])


def test_loss_alpha_monotone_towards_target(rng):
    gt = rng.random(200)
    start = rng.random(200)
    prev = np.inf
    for s in np.linspace(0, 1, 11):
        cur = loss_alpha(torch.tensor(start + s * (gt - start)), gt).item()
        assert cur <= prev + 1e-12
        prev = cur
    assert prev < 1e-9


def test_loss_sign_examples(rng):
    assert loss_sign(torch.full((7,), 0.5, dtype=torch.float64), [True] * 3 + [False] * 4).item() == pytest.approx(math.log(2))
    y = rng.random(50) < 0.5
    assert loss_sign(torch.tensor(y.astype(float)), y).item() <= 1e-6
    p = rng.uniform(0.01, 0.99, 50)
    hand = -sum(math.log(pi) if yi else math.log(1 - pi) for pi, yi in zip(p, y)) / 50
    assert loss_sign(torch.tensor(p), y).item() == pytest.approx(hand, rel=1e-12)


def test_loss_sign_gradient_analytic(rng):
    p = torch.tensor(rng.uniform(0.05, 0.95, 20), requires_grad=True)
    y = rng.random(20) < 0.5
    loss_sign(p, y).backward()
    pn = p.detach().numpy()
    expect = np.where(y, -1 / pn, 1 / (1 - pn)) / 20
    np.testing.assert_allclose(p.grad.numpy(), expect, rtol=1e-12)


def test_cosine_endpoints():
    assert cosine_lr(0, 1000, 1e-3) == 1e-3
    assert cosine_lr(1000, 1000, 1e-3) <= 1e-9
    assert cosine_lr(500, 1000, 1e-3) == pytest.approx(5e-4)


def test_finite_differences_every_segment():
    model, prep, batch = tiny_setup()
    assert (~batch.same_side).any() and batch.same_side.any()
    rng = np.random.default_rng(0)
    picks = np.concatenate([
        rng.choice(np.arange(s, e), size=min(4, e - s), replace=False)
        for _, _, s, e, _ in parameter_table(model)
    ])
    worst = finite_difference_check(model, prep, batch, TrainConfig(), h=1e-4, indices=picks)
    assert set(worst) == {seg for _, seg, *_ in parameter_table(model)}
    assert max(worst.values()) <= 1e-3, worst


def test_zero_alpha_weight_silences_h_path():
    model, prep, batch = tiny_setup()
    _, g = backward(model, prep, batch, weights(1.0, 1.0))
    _, g0 = backward(model, prep, batch, weights(1.0, 0.0))
    for seg in ("alpha_head", "pe_alpha"):
        for s, e in segment_slices(model, seg):
            assert torch.all(g0[s:e] == 0)
            assert torch.any(g[s:e] != 0)


def test_doubled_weight_doubles_segment():
    model, prep, batch = tiny_setup()
    _, g1 = backward(model, prep, batch, weights(1.0, 1.0))
    _, g2 = backward(model, prep, batch, weights(2.0, 1.0))
    _, g3 = backward(model, prep, batch, weights(1.0, 2.0))
    for s, e in segment_slices(model, "sign_head"):
        torch.testing.assert_close(g2[s:e], 2 * g1[s:e], rtol=1e-12, atol=1e-15)
        torch.testing.assert_close(g3[s:e], g1[s:e], rtol=1e-12, atol=1e-15)
    for s, e in segment_slices(model, "alpha_head"):
        torch.testing.assert_close(g3[s:e], 2 * g1[s:e], rtol=1e-12, atol=1e-15)
        torch.testing.assert_close(g2[s:e], g1[s:e], rtol=1e-12, atol=1e-15)


def test_adam_zero_gradient_no_move():
    model = GridNet(ModelConfig(dim=8))
    before = [p.detach().clone() for p in model.parameters()]
    opt = make_optimizer(model, 1e-3)
    for p in model.parameters():
        p.grad = torch.zeros_like(p)
    opt.step()
    for b, p in zip(before, model.parameters()):
        assert torch.equal(b, p.detach())


def test_train_deterministic_checkpoints(tmp_path):
    train([Sphere(0.4)], TINY, out_dir=tmp_path / "a")
    train([Sphere(0.4)], TINY, out_dir=tmp_path / "b")
    a = (tmp_path / "a" / "epoch_001.json").read_bytes()
    assert a == (tmp_path / "b" / "epoch_001.json").read_bytes()
    assert a == (tmp_path / "a" / "model.json").read_bytes()
    recs = [json.loads(x) for x in (tmp_path / "a" / "train_log.jsonl").read_text().splitlines()]
    assert len(recs) == 1 and recs[0]["step"] == 3
    assert recs[0]["antisymmetry"] < 1e-6
    assert 0 <= recs[0]["sign_accuracy"] <= 1


def test_train_records_and_schedule():
    seen = []
    cfg = TrainConfig(pairs_per_iter=48, epochs=2, iters_per_epoch=2, cloud_points=100, heldout_pairs=48, dim=8)
    model, recs = train([Sphere(0.4)], cfg, log=seen.append)
    assert recs == seen and [r["epoch"] for r in recs] == [1, 2]
    assert recs[-1]["lr"] <= 1e-9
    assert not model.training


def test_divergence_reports_step(monkeypatch):
    real = training.pair_losses

    def poisoned(model, field, batch, config):
        total, *rest = real(model, field, batch, config)
        return (total * float("nan"), *rest)

    monkeypatch.setattr(training, "pair_losses", poisoned)
    with pytest.raises(TrainingDivergence) as info:
        train([Sphere(0.4)], TINY)
    assert info.value.step == 0 and info.value.lr == pytest.approx(1e-3)
    assert isinstance(info.value, FloatingPointError)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(lr0=0.0)
    with pytest.raises(ValueError):
        train([], TINY)
    assert TrainConfig(epochs=3, iters_per_epoch=7).total_steps == 21
