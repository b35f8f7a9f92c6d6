"""Learnable pair predictor: point encoder, feature interpolation, and the two heads.

The sign head ``G`` is symmetric in its two inputs and the crossing head
``H`` is antisymmetric (``H(a, b) = 1 - H(b, a)``). Both properties are
structural: ``G`` only sees symmetric combinations of the endpoint features
plus an even (cosine) encoding of ``a - b``; ``H`` sees ``f_a - f_b`` plus a
bias-free projection of an odd (sine) encoding, and runs it through a
bias-free tanh MLP before the sigmoid.
"""

import json
from dataclasses import asdict, dataclass, fields

import numpy as np
import torch
from torch import nn

from gridmesh.geometry import PointCloud, SpatialIndex

CHECKPOINT_FORMAT = "gridmesh-checkpoint"
CHECKPOINT_VERSION = 1
N_FREQ = 20
PE_DIM = 3 * N_FREQ
EXACT_HIT = 1e-12
SEGMENTS = ("encoder", "query", "pe_sign", "sign_head", "pe_alpha", "alpha_head")


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 64
    encoder_k: int = 16
    interp_k: int = 8
    interp_power: float = 2.0
    # offsets are multiplied by this before entering any MLP
    local_scale: float = 512.0
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.encoder_k < 1 or self.interp_k < 1:
            raise ValueError("model dimensions and neighbour counts must be positive")


def _freqs(dtype):
    return torch.pow(torch.tensor(2.0, dtype=dtype), -torch.arange(N_FREQ, dtype=dtype))


def cos_encoding(delta):
    """``cos(delta / 2^i)`` for i in 0..19, per axis; even in ``delta``. (M, 3) -> (M, 60)."""
    x = delta[..., None] * _freqs(delta.dtype)
    return torch.cos(x).reshape(*delta.shape[:-1], PE_DIM)


def sin_encoding(delta):
    """``sin(delta / 2^i)`` for i in 0..19, per axis; odd in ``delta``."""
    x = delta[..., None] * _freqs(delta.dtype)
    return torch.sin(x).reshape(*delta.shape[:-1], PE_DIM)


def _mlp(sizes, bias=True, act=nn.SiLU):
    layers = []
    for i in range(len(sizes) - 1):
        layers.append(nn.Linear(sizes[i], sizes[i + 1], bias=bias))
        if i < len(sizes) - 2:
            layers.append(act())
    return nn.Sequential(*layers)


class VectorAttention(nn.Module):
    """kNN vector attention over relative offsets, with a residual connection."""

    def __init__(self, dim):
        super().__init__()
        self.to_q = nn.Linear(dim, dim)
        self.to_k = nn.Linear(dim, dim)
        self.to_v = nn.Linear(dim, dim)
        self.pos = _mlp([3, dim, dim])
        self.weigh = nn.Linear(dim, dim)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x, nbr, rel):
        # x (N, D); nbr (N, k) neighbour rows; rel (N, k, 3) scaled p_j - p_i
        delta = self.pos(rel)
        q = self.to_q(x)[:, None, :]
        key = self.to_k(x)[nbr]
        val = self.to_v(x)[nbr]
        w = torch.softmax(self.weigh(torch.nn.functional.silu(q - key + delta)), dim=1)
        return x + self.proj((w * (val + delta)).sum(dim=1))


class Encoder(nn.Module):
    def __init__(self, dim):
        super().__init__()
        self.lift = _mlp([3, dim, dim])
        self.layers = nn.ModuleList([VectorAttention(dim), VectorAttention(dim)])
        self.out = _mlp([dim, dim, dim])

    def forward(self, points, nbr, rel):
        x = self.lift(points)
        for layer in self.layers:
            x = layer(x, nbr, rel)
        return self.out(x)


class QueryFeatures(nn.Module):
    """Per-neighbour feature conditioned on the query offset ``q - p_j``."""

    def __init__(self, dim):
        super().__init__()
        self.feat = nn.Linear(dim, dim)
        self.offset = nn.Linear(3, dim)
        self.gate = nn.Linear(dim, dim)
        self.mix = nn.Linear(3, dim, bias=False)
        self.out = _mlp([dim, dim, dim])

    def forward(self, f, off, w):
        # f (M, k, D) neighbour features, off (M, k, 3), w (M, k) blend weights
        h = torch.nn.functional.silu(self.feat(f) + self.offset(off) + self.gate(f) * self.mix(off))
        return self.out((w[..., None] * h).sum(dim=1))


@dataclass(eq=False)
class FeatureField:
    """Per-point features over a cloud plus the inverse-distance interpolation rule."""

    points: np.ndarray
    features: torch.Tensor
    index: SpatialIndex
    k: int = 8
    power: float = 2.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.features.ndim != 2 or self.features.shape[0] != self.points.shape[0]:
            raise ValueError("one feature row per point required")

    @property
    def dim(self):
        return self.features.shape[1]


def idw_weights(field, q):
    """Neighbour rows ``(M, k)`` and normalised inverse-distance weights ``(M, k)``.

    A query within EXACT_HIT of a cloud point takes that point's weight only.
    """
    q = np.asarray(q, dtype=np.float64).reshape(-1, 3)
    idx, d = field.index.knn(q, field.k)
    hit = d[:, 0] < EXACT_HIT
    with np.errstate(divide="ignore"):
        w = 1.0 / np.power(np.where(hit[:, None], 1.0, d), field.power)
    w[hit] = 0.0
    w[hit, 0] = 1.0
    w /= w.sum(axis=1, keepdims=True)
    return idx, w


def interpolate(field, q):
    """Inverse-distance-weighted average of the k nearest point features."""
    idx, w = idw_weights(field, q)
    wt = torch.as_tensor(w, dtype=field.features.dtype)
    return (wt[..., None] * field.features[torch.as_tensor(idx)]).sum(dim=1)


@dataclass(eq=False)
class PreparedCloud:
    """Cloud tensors and encoder neighbourhoods, reusable across forward passes."""

    cloud: PointCloud
    index: SpatialIndex
    nbr: torch.Tensor
    rel: np.ndarray


def prepare_cloud(cloud, k=16, workers=1):
    index = SpatialIndex(cloud.points, workers=workers)
    nbr, _ = index.knn(cloud.points, k)
    rel = cloud.points[nbr] - cloud.points[:, None, :]
    return PreparedCloud(cloud, index, torch.as_tensor(nbr), rel)


class GridNet(nn.Module):
    def __init__(self, config=None):
        super().__init__()
        self.config = config or ModelConfig()
        dim = self.config.dim
        self.encoder = Encoder(dim)
        self.query = QueryFeatures(dim)
        self.pe_sign = nn.Linear(PE_DIM, dim)
        self.sign_head = _mlp([3 * dim, dim, dim, 1])
        self.pe_alpha = nn.Linear(PE_DIM, dim, bias=False)
        self.alpha_head = _mlp([dim, dim, dim, 1], bias=False, act=nn.Tanh)
        self.reset_parameters(self.config.seed)

    def reset_parameters(self, seed):
        g = torch.Generator().manual_seed(int(seed))
        for name, p in self.named_parameters():
            if name.endswith("bias"):
                nn.init.zeros_(p)
            else:
                nn.init.xavier_uniform_(p, generator=g)

    @property
    def dtype(self):
        return self.pe_sign.weight.dtype

    def _tensor(self, x):
        return torch.tensor(np.asarray(x, dtype=np.float64), dtype=self.dtype)

    def encode(self, cloud):
        """Per-point features; accepts a PointCloud or a PreparedCloud."""
        prep = cloud if isinstance(cloud, PreparedCloud) else prepare_cloud(cloud, self.config.encoder_k)
        pts = self._tensor(prep.cloud.points)
        rel = self._tensor(prep.rel * self.config.local_scale)
        feats = self.encoder(pts, prep.nbr, rel)
        return FeatureField(prep.cloud.points, feats, prep.index, self.config.interp_k, self.config.interp_power)

    def query_features(self, field, q):
        """IDW blend of neighbour features conditioned on their offset to ``q``."""
        q = np.asarray(q, dtype=np.float64).reshape(-1, 3)
        idx, w = idw_weights(field, q)
        off = self._tensor((q[:, None, :] - field.points[idx]) * self.config.local_scale)
        return self.query(field.features[torch.as_tensor(idx)], off, self._tensor(w))

    def sign_logit(self, fa, fb, a, b):
        pos = self.pe_sign(cos_encoding(a - b))
        z = torch.cat([fa + fb + pos, fa * fb + pos, torch.maximum(fa, fb) + pos], dim=-1)
        return self.sign_head(z).squeeze(-1)

    def alpha_logit(self, fa, fb, a, b):
        d = (fa - fb) + self.pe_alpha(sin_encoding(a - b))
        return self.alpha_head(d).squeeze(-1)

    def predict_same_side(self, fa, fb, a, b):
        return torch.sigmoid(self.sign_logit(fa, fb, a, b))

    def predict_alpha(self, fa, fb, a, b):
        return torch.sigmoid(self.alpha_logit(fa, fb, a, b))

    def forward_pairs(self, field, a, b):
        """``(same-side probability, alpha)`` tensors for endpoint arrays ``a``, ``b``."""
        a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
        b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
        f = self.query_features(field, np.concatenate([a, b]))
        fa, fb = f[: a.shape[0]], f[a.shape[0]:]
        ta, tb = self._tensor(a), self._tensor(b)
        return self.predict_same_side(fa, fb, ta, tb), self.predict_alpha(fa, fb, ta, tb)


def segment_of(name):
    return name.split(".", 1)[0]


def parameter_table(model):
    """``[(name, segment, start, stop, shape)]`` addressing the flat parameter vector."""
    out, start = [], 0
    for name, p in model.named_parameters():
        out.append((name, segment_of(name), start, start + p.numel(), tuple(p.shape)))
        start += p.numel()
    return out


def parameter_count(model):
    return sum(p.numel() for p in model.parameters())


def flat_parameters(model):
    return torch.cat([p.detach().reshape(-1) for p in model.parameters()])


def set_flat_parameters(model, flat):
    flat = torch.as_tensor(flat)
    with torch.no_grad():
        for (_, _, s, e, shape), p in zip(parameter_table(model), model.parameters()):
            p.copy_(flat[s:e].reshape(shape))


def flat_gradient(model):
    return torch.cat([
        (p.grad if p.grad is not None else torch.zeros_like(p)).reshape(-1) for p in model.parameters()
    ])


def alpha_path_has_bias(model):
    names = [n for n, _ in model.named_parameters() if segment_of(n) in ("pe_alpha", "alpha_head")]
    return any(n.endswith("bias") for n in names)


def save_checkpoint(path, model, train_config=None):
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model_config": asdict(model.config),
        "pe": {"n_freq": N_FREQ, "sign_mode": "cosine", "alpha_mode": "sine", "raw_dim": PE_DIM},
        "dtype": str(model.dtype).replace("torch.", ""),
        "parameter_count": parameter_count(model),
        "train_config": train_config,
        "segments": {
            name: {"shape": list(p.shape), "data": p.detach().double().reshape(-1).tolist()}
            for name, p in model.named_parameters()
        },
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")
    return payload


def load_checkpoint(path):
    """Return ``(model, payload)``; the model is in eval mode."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as err:
        raise CheckpointError(f"{path}: not a JSON checkpoint ({err})") from None
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a gridmesh checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    known = {f.name for f in fields(ModelConfig)}
    cfg = ModelConfig(**{k: v for k, v in payload["model_config"].items() if k in known})
    model = GridNet(cfg)
    if payload.get("dtype") == "float64":
        model = model.double()
    segs = payload["segments"]
    names = [n for n, _ in model.named_parameters()]
    if sorted(names) != sorted(segs):
        raise CheckpointError(f"{path}: parameter segments do not match the model layout")
    with torch.no_grad():
        for name, p in model.named_parameters():
            seg = segs[name]
            if tuple(seg["shape"]) != tuple(p.shape):
                raise CheckpointError(f"{path}: incompatible shape for {name}")
            p.copy_(torch.tensor(seg["data"], dtype=torch.float64).reshape(p.shape))
    model.eval()
    return model, payload


class ModelPredictor:
    """Mesher predictor backed by a trained model and an input cloud."""

    def __init__(self, model, cloud, chunk=32768):
        self.model = model
        self.chunk = chunk
        with torch.no_grad():
            self.field = model.encode(cloud)

    def _run(self, a, b, which):
        a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
        b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
        out = np.empty(a.shape[0])
        with torch.no_grad():
            for s in range(0, a.shape[0], self.chunk):
                p, al = self.model.forward_pairs(self.field, a[s:s + self.chunk], b[s:s + self.chunk])
                out[s:s + self.chunk] = (p if which == 0 else al).double().numpy()
        return out

    def same_side_prob(self, a, b):
        return self._run(a, b, 0)

    def alpha(self, a, b):
        return self._run(a, b, 1)
