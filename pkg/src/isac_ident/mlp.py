"""Minimal deterministic feed-forward network for per-candidate scoring.

Two input branches (radar state and beam index) expand separately through
three dense layers each, are concatenated, and a four-layer head reduces
to a single sigmoid likelihood. Everything is plain numpy float64 with
hand-written backpropagation and Adam, so training is bit-reproducible
for a fixed seed on a given platform.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from isac_ident.seeding import child_rng

_CKPT_MAGIC = b"MLPC"
_CKPT_VERSION = 1
_ACT_CODES = {"relu": 0, "sigmoid": 1, "identity": 2}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}


class CheckpointError(ValueError):
    """Model checkpoint file is malformed."""


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray     # (out,)
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in _ACT_CODES:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError("weight/bias shapes are inconsistent")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ValueError("layer parameters must be finite")


@dataclass(frozen=True)
class NormBounds:
    """Input normalization constants mapping raw features into [0, 1]."""

    range_max: float
    angle_span: float
    vel_max: float
    n_beams: int

    def __post_init__(self):
        if min(self.range_max, self.angle_span, self.vel_max) <= 0 or self.n_beams < 1:
            raise ValueError("normalization constants must be positive")


@dataclass(frozen=True)
class ModelWidths:
    """Hidden widths per branch; the head ends in a single sigmoid unit."""

    radar: tuple[int, ...] = (16, 32, 64)
    beam: tuple[int, ...] = (16, 32, 64)
    head: tuple[int, ...] = (64, 32, 16)


@dataclass
class MlpModel:
    radar_branch: list[DenseLayer]
    beam_branch: list[DenseLayer]
    head: list[DenseLayer]
    norm: NormBounds

    def layers(self) -> list[DenseLayer]:
        return [*self.radar_branch, *self.beam_branch, *self.head]

    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for layer in self.layers():
            out.append(layer.weights)
            out.append(layer.bias)
        return out

    def set_parameters(self, params: list[np.ndarray]) -> None:
        layers = self.layers()
        if len(params) != 2 * len(layers):
            raise ValueError("parameter list length mismatch")
        for k, layer in enumerate(layers):
            w, b = params[2 * k], params[2 * k + 1]
            if w.shape != layer.weights.shape or b.shape != layer.bias.shape:
                raise ValueError("parameter shape mismatch")
            layer.weights = w
            layer.bias = b


def init_weights(widths: ModelWidths, norm: NormBounds, seed: int = 0) -> MlpModel:
    """He-style uniform initialization: weights ~ U[-sqrt(6/fan_in), +sqrt(6/fan_in)]."""
    rng = child_rng(seed, "init")

    def make(sizes, final_out=None, final_act=None):
        layers = []
        dims = list(sizes)
        for j in range(len(dims) - 1):
            fan_in, fan_out = dims[j], dims[j + 1]
            bound = np.sqrt(6.0 / fan_in)
            layers.append(DenseLayer(
                weights=rng.uniform(-bound, bound, size=(fan_out, fan_in)),
                bias=np.zeros(fan_out),
                activation="relu",
            ))
        if final_out is not None:
            fan_in = dims[-1]
            bound = np.sqrt(6.0 / fan_in)
            layers.append(DenseLayer(
                weights=rng.uniform(-bound, bound, size=(final_out, fan_in)),
                bias=np.zeros(final_out),
                activation=final_act,
            ))
        return layers

    radar = make((3, *widths.radar))
    beam = make((1, *widths.beam))
    concat = widths.radar[-1] + widths.beam[-1]
    head = make((concat, *widths.head), final_out=1, final_act="sigmoid")
    return MlpModel(radar_branch=radar, beam_branch=beam, head=head, norm=norm)


def _apply_activation(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))
    return z


def _activation_grad(z: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0).astype(float)
    if kind == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(z)


def _forward_layers(layers, x):
    caches = []
    a = x
    for layer in layers:
        z = a @ layer.weights.T + layer.bias
        out = _apply_activation(z, layer.activation)
        caches.append((a, z, out))
        a = out
    return a, caches


def _backward_layers(layers, caches, d_out):
    grads: list[np.ndarray] = []
    d = d_out
    for layer, (a_in, z, a_out) in zip(reversed(layers), reversed(caches)):
        dz = d * _activation_grad(z, a_out, layer.activation)
        grads.append(dz.sum(axis=0))        # bias
        grads.append(dz.T @ a_in)           # weights
        d = dz @ layer.weights
    grads.reverse()  # now (dW, db) per layer in forward order
    return grads, d


def normalize_inputs(norm: NormBounds, feats: np.ndarray, beams: np.ndarray):
    """Map raw (range, angle, velocity) rows and beam indices into [0, 1]."""
    feats = np.asarray(feats, dtype=float)
    beams = np.asarray(beams, dtype=float)
    x_radar = np.column_stack([
        feats[:, 0] / norm.range_max,
        (feats[:, 1] + norm.angle_span / 2.0) / norm.angle_span,
        (feats[:, 2] + norm.vel_max) / (2.0 * norm.vel_max),
    ])
    denom = max(norm.n_beams - 1, 1)
    x_beam = (beams / denom)[:, None]
    return x_radar, x_beam


def _score_batch(model: MlpModel, feats: np.ndarray, beams: np.ndarray):
    x_radar, x_beam = normalize_inputs(model.norm, feats, beams)
    a_radar, c_radar = _forward_layers(model.radar_branch, x_radar)
    a_beam, c_beam = _forward_layers(model.beam_branch, x_beam)
    h = np.concatenate([a_radar, a_beam], axis=1)
    s, c_head = _forward_layers(model.head, h)
    return s[:, 0], (c_radar, c_beam, c_head, a_radar.shape[1])


def score_candidates(model: MlpModel, feats, beams) -> np.ndarray:
    """Likelihood scores for raw (range, angle, velocity) rows and beam indices."""
    feats = np.atleast_2d(np.asarray(feats, dtype=float))
    beams = np.atleast_1d(np.asarray(beams, dtype=float))
    if not (np.isfinite(feats).all() and np.isfinite(beams).all()):
        raise ValueError("model inputs must be finite")
    scores, _ = _score_batch(model, feats, beams)
    return scores


def forward(model: MlpModel, candidate, beam: int) -> float:
    """Score one candidate object against one beam index."""
    feats = [(candidate.range_m, candidate.angle_deg, candidate.vel_mps)]
    return float(score_candidates(model, feats, [beam])[0])


def loss_and_grad_arrays(model: MlpModel, feats, beams, targets):
    """Mean squared error over a batch plus backprop gradients.

    Gradients come back as a flat list aligned with model.parameters().
    """
    feats = np.asarray(feats, dtype=float)
    beams = np.asarray(beams, dtype=float)
    y = np.asarray(targets, dtype=float)
    if len(y) == 0:
        raise ValueError("batch must be non-empty")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("targets must be 0 or 1")
    scores, (c_radar, c_beam, c_head, radar_width) = _score_batch(model, feats, beams)
    err = scores - y
    loss = float(np.mean(err ** 2))

    d_scores = (2.0 / len(y)) * err[:, None]
    g_head, d_h = _backward_layers(model.head, c_head, d_scores)
    g_radar, _ = _backward_layers(model.radar_branch, c_radar, d_h[:, :radar_width])
    g_beam, _ = _backward_layers(model.beam_branch, c_beam, d_h[:, radar_width:])
    return loss, [*g_radar, *g_beam, *g_head]


def loss_and_grad(model: MlpModel, batch):
    """Batch of (candidate, beam, target) triples -> (mse, gradient list)."""
    if not batch:
        raise ValueError("batch must be non-empty")
    feats = [(c.range_m, c.angle_deg, c.vel_mps) for c, _, _ in batch]
    beams = [b for _, b, _ in batch]
    targets = [t for _, _, t in batch]
    return loss_and_grad_arrays(model, feats, beams, targets)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params, lr: float = 1e-3, beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=0,
                   m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


def adam_step(state: AdamState, params, grads) -> list[np.ndarray]:
    """One bias-corrected Adam update; returns the new parameter arrays."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter, gradient and state lengths must match")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    new_params = []
    for k, (p, g) in enumerate(zip(params, grads)):
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[k] / bc1
        v_hat = state.v[k] / bc2
        new_params.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return new_params


def save_model(model: MlpModel, path, hyper: dict | None = None) -> None:
    """Versioned binary checkpoint plus a human-readable JSON sidecar."""
    layers = model.layers()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sI", _CKPT_MAGIC, _CKPT_VERSION))
        fh.write(struct.pack("<dddd", model.norm.range_max, model.norm.angle_span,
                             model.norm.vel_max, float(model.norm.n_beams)))
        fh.write(struct.pack("<III", len(model.radar_branch),
                             len(model.beam_branch), len(model.head)))
        for layer in layers:
            fh.write(struct.pack("<IIB", layer.weights.shape[0],
                                 layer.weights.shape[1], _ACT_CODES[layer.activation]))
        for layer in layers:
            fh.write(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
    sidecar = {
        "format_version": _CKPT_VERSION,
        "normalization": {
            "range_max": model.norm.range_max,
            "angle_span": model.norm.angle_span,
            "vel_max": model.norm.vel_max,
            "n_beams": model.norm.n_beams,
        },
        "layers": [
            {"out": int(l.weights.shape[0]), "in": int(l.weights.shape[1]),
             "activation": l.activation}
            for l in layers
        ],
        "hyperparameters": hyper or {},
    }
    Path(str(path) + ".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_model(path) -> MlpModel:
    path = Path(path)
    raw = path.read_bytes()
    off = 0

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(raw):
            raise CheckpointError(f"{path}: truncated checkpoint")
        vals = struct.unpack_from(fmt, raw, off)
        off += size
        return vals

    magic, version = take("<4sI")
    if magic != _CKPT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != _CKPT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    r_max, a_span, v_max, n_beams = take("<dddd")
    n_radar, n_beam, n_head = take("<III")
    shapes = [take("<IIB") for _ in range(n_radar + n_beam + n_head)]
    layers = []
    for out_dim, in_dim, act in shapes:
        if act not in _ACT_NAMES:
            raise CheckpointError(f"{path}: unknown activation code {act}")
        n_w, n_b = out_dim * in_dim, out_dim
        need = (n_w + n_b) * 8
        if off + need > len(raw):
            raise CheckpointError(f"{path}: truncated weight data")
        w = np.frombuffer(raw, dtype="<f8", count=n_w, offset=off).reshape(out_dim, in_dim)
        off += n_w * 8
        b = np.frombuffer(raw, dtype="<f8", count=n_b, offset=off)
        off += n_b * 8
        layers.append(DenseLayer(weights=w.copy(), bias=b.copy(),
                                 activation=_ACT_NAMES[act]))
    norm = NormBounds(range_max=r_max, angle_span=a_span, vel_max=v_max,
                      n_beams=int(n_beams))
    return MlpModel(radar_branch=layers[:n_radar],
                    beam_branch=layers[n_radar:n_radar + n_beam],
                    head=layers[n_radar + n_beam:], norm=norm)
