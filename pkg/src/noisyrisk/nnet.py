"""Compact feed-forward binary classifier with hand-derived gradients.

Two ReLU hidden layers feed a 2-logit softmax head. Losses are the (optionally
class-weighted) cross-entropy and its soft-target generalization; training
uses classic momentum SGD under a cosine learning-rate schedule.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

PROB_FLOOR = 1e-12


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    """Raised when a non-finite value shows up in the forward or backward pass."""

    def __init__(self, message: str, layer: int | None = None):
        super().__init__(message)
        self.layer = layer


@dataclass
class Layer:
    weight: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray  # (fan_out,)


@dataclass
class MlpParams:
    layers: list[Layer]

    def __post_init__(self):
        for k, layer in enumerate(self.layers):
            if layer.weight.ndim != 2 or layer.bias.shape != (layer.weight.shape[1],):
                raise ShapeError(f"layer {k}: bias shape {layer.bias.shape} does not match weight {layer.weight.shape}")
            if k and self.layers[k - 1].weight.shape[1] != layer.weight.shape[0]:
                raise ShapeError(f"layer {k}: fan_in {layer.weight.shape[0]} breaks the chain")
        if self.layers[-1].weight.shape[1] != 2:
            raise ShapeError("final layer must emit 2 logits")

    @property
    def sizes(self) -> list[int]:
        return [self.layers[0].weight.shape[0]] + [l.weight.shape[1] for l in self.layers]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out

    def copy(self) -> MlpParams:
        return MlpParams([Layer(l.weight.copy(), l.bias.copy()) for l in self.layers])

    def zeros_like(self) -> MlpParams:
        return MlpParams([Layer(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in self.layers])


@dataclass(frozen=True)
class CostWeights:
    w0: float = 1.0
    w1: float = 1.0

    def __post_init__(self):
        if not (self.w0 > 0 and self.w1 > 0):
            raise ValueError(f"cost weights must be strictly positive, got ({self.w0}, {self.w1})")

    def as_array(self) -> np.ndarray:
        return np.array([self.w0, self.w1], dtype=np.float64)


PLAIN = CostWeights(1.0, 1.0)


def init_mlp(n_in: int, hidden: Sequence[int] = (64, 64), rng: np.random.Generator | None = None) -> MlpParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization for weights and biases."""
    rng = rng if rng is not None else np.random.default_rng(0)
    sizes = [n_in, *hidden, 2]
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        b = rng.uniform(-bound, bound, size=fan_out)
        layers.append(Layer(w, b))
    return MlpParams(layers)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward_cached(params: MlpParams, features: np.ndarray) -> list[np.ndarray]:
    """Activations of every layer, input first and logits last."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.layers[0].weight.shape[0]:
        raise ShapeError(f"expected (n, {params.layers[0].weight.shape[0]}) features, got {x.shape}")
    if not np.isfinite(x).all():
        raise NonFiniteError("non-finite input features", layer=0)
    acts = [x]
    h = x
    last = len(params.layers) - 1
    for k, layer in enumerate(params.layers):
        z = h @ layer.weight + layer.bias
        if not np.isfinite(z).all():
            raise NonFiniteError(f"non-finite pre-activation at layer {k}", layer=k)
        h = z if k == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def forward(params: MlpParams, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(logits, probs)``; probs rows are the softmax of logits rows."""
    logits = forward_cached(params, features)[-1]
    return logits, softmax(logits)


def cs_loss_per_sample(probs: np.ndarray, labels: np.ndarray, weights: CostWeights = PLAIN) -> np.ndarray:
    """``-w[y] * log(p[y])`` per sample, with p floored at 1e-12."""
    labels = np.asarray(labels, dtype=np.int64)
    p = probs[np.arange(len(labels)), labels]
    return -weights.as_array()[labels] * np.log(np.maximum(p, PROB_FLOOR))


def ce_per_sample(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    return cs_loss_per_sample(probs, labels, PLAIN)


def soft_ce_per_sample(probs: np.ndarray, targets: np.ndarray, weights: CostWeights = PLAIN) -> np.ndarray:
    """Cross-entropy against soft targets, scaled by the expected class weight q0*w0 + q1*w1."""
    wq = targets @ weights.as_array()
    return -wq * (targets * np.log(np.maximum(probs, PROB_FLOOR))).sum(axis=1)


def backward_from_logits(params: MlpParams, acts: list[np.ndarray], dlogits: np.ndarray) -> MlpParams:
    """Back-propagate a gradient w.r.t. the output logits through the ReLU stack."""
    grads: list[Layer] = [None] * len(params.layers)  # type: ignore[list-item]
    delta = dlogits
    for k in range(len(params.layers) - 1, -1, -1):
        h_in = acts[k]
        gw = h_in.T @ delta
        gb = delta.sum(axis=0)
        if not (np.isfinite(gw).all() and np.isfinite(gb).all()):
            raise NonFiniteError(f"non-finite gradient at layer {k}", layer=k)
        grads[k] = Layer(gw, gb)
        if k:
            delta = (delta @ params.layers[k].weight.T) * (acts[k] > 0)
    return MlpParams(grads)


def backward(
    params: MlpParams, features: np.ndarray, labels: np.ndarray, weights: CostWeights = PLAIN
) -> MlpParams:
    """Gradients of the batch-mean cost-sensitive CE w.r.t. every parameter."""
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise ValueError("backward needs a nonempty batch")
    acts = forward_cached(params, features)
    probs = softmax(acts[-1])
    onehot = np.eye(2)[labels]
    dlogits = weights.as_array()[labels][:, None] * (probs - onehot) / len(labels)
    return backward_from_logits(params, acts, dlogits)


def loss_and_grad(params: MlpParams, features: np.ndarray, labels: np.ndarray, weights: CostWeights = PLAIN):
    """Mean CS loss and its gradient in one pass (the training hot path)."""
    labels = np.asarray(labels, dtype=np.int64)
    acts = forward_cached(params, features)
    probs = softmax(acts[-1])
    w = weights.as_array()[labels]
    loss = float(np.mean(-w * np.log(np.maximum(probs[np.arange(len(labels)), labels], PROB_FLOOR))))
    dlogits = w[:, None] * (probs - np.eye(2)[labels]) / len(labels)
    return loss, backward_from_logits(params, acts, dlogits)


@dataclass
class OptimState:
    buffers: MlpParams
    momentum: float = 0.9
    base_lr: float = 0.01
    epoch: int = 0
    total_epochs: int = 1

    @classmethod
    def for_params(cls, params: MlpParams, momentum=0.9, base_lr=0.01, total_epochs=1) -> OptimState:
        if not 0.0 <= momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if not base_lr > 0:
            raise ValueError("base_lr must be positive")
        return cls(params.zeros_like(), momentum, base_lr, 0, total_epochs)

    @property
    def lr(self) -> float:
        return cosine_lr(self.epoch, self.total_epochs, self.base_lr)


def cosine_lr(epoch: int, total_epochs: int, base_lr: float) -> float:
    if not 0 <= epoch < total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {total_epochs})")
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * epoch / total_epochs))


def sgd_momentum_step(params: MlpParams, grads: MlpParams, state: OptimState, lr: float | None = None) -> MlpParams:
    """Classic momentum: ``buf = mu*buf + g``; ``param -= lr * buf``. Updates in place."""
    lr = state.lr if lr is None else lr
    for p, g, b in zip(params.arrays(), grads.arrays(), state.buffers.arrays()):
        if p.shape != g.shape or p.shape != b.shape:
            raise ShapeError(f"shape mismatch in optimizer step: {p.shape} vs {g.shape}")
        b *= state.momentum
        b += g
        p -= lr * b
    return params


def predict_from_probs(probs: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    return (probs[:, 1] >= threshold).astype(np.int64)


def predict(params: MlpParams, features: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """1 iff p(positive) >= threshold; ties go to the positive class."""
    return predict_from_probs(forward(params, features)[1], threshold)


def save_checkpoint(params: MlpParams, path: str | Path) -> None:
    """JSON dump of layer shapes and row-major values (repr floats round-trip exactly)."""
    doc = {
        "format": "noisyrisk-mlp-v1",
        "layers": [
            {"shape": list(l.weight.shape), "weight": l.weight.ravel().tolist(), "bias": l.bias.tolist()}
            for l in params.layers
        ],
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path: str | Path) -> MlpParams:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "noisyrisk-mlp-v1":
        raise ValueError(f"unrecognized checkpoint format {doc.get('format')!r}")
    layers = [
        Layer(np.array(d["weight"], dtype=np.float64).reshape(d["shape"]), np.array(d["bias"], dtype=np.float64))
        for d in doc["layers"]
    ]
    return MlpParams(layers)
