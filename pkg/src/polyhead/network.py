"""Fully-connected backbone with a frozen or trainable classifier head.

Plain numpy forward/backward: affine layers with per-unit PReLU, He
initialization, Adam updates.  A fixed head keeps its polytope rows
bit-identical through training; the trainable head is the baseline whose
rows are updated like any other parameter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from . import losses
from .data import LabeledBatch, batches
from .polytope import ClassifierWeights, from_dict as weights_from_dict, to_dict as weights_to_dict

PRELU_SLOPE_INIT = 0.25


class CacheError(ValueError):
    """Backward called with a cache from a different forward pass."""


@dataclass
class Layer:
    w: np.ndarray       # (out, in)
    b: np.ndarray       # (out,)
    slope: np.ndarray   # (out,) PReLU negative-side slopes


@dataclass
class FixedHead:
    weights: ClassifierWeights

    @property
    def rows(self) -> np.ndarray:
        return self.weights.rows

    @property
    def num_classes(self) -> int:
        return self.weights.num_classes

    @property
    def dim(self) -> int:
        return self.weights.dim


@dataclass
class TrainableHead:
    rows: np.ndarray  # (K, d), updated by the optimizer

    @property
    def num_classes(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass
class MlpModel:
    input_dim: int
    layers: List[Layer]
    head: Union[FixedHead, TrainableHead]

    @property
    def embed_dim(self) -> int:
        return self.head.dim


@dataclass
class ModelGrads:
    layers: List[Layer]  # same shapes, holding gradients
    head_rows: Optional[np.ndarray] = None


@dataclass
class TrainConfig:
    loss: losses.LossKind
    epochs: int
    seed: int
    hidden_widths: List[int]
    batch_size: int = 512
    lr: float = 0.0005


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    train_accuracy: float


def init_model(input_dim: int, hidden_widths: List[int],
               head: Union[ClassifierWeights, int], seed: int,
               trainable_classes: Optional[int] = None) -> MlpModel:
    """He-initialized MLP.  ``head`` is a ClassifierWeights for a fixed
    head; pass ``trainable_classes`` (with head=None) for the baseline."""
    if not hidden_widths or any(w < 1 for w in hidden_widths):
        raise ValueError(f"hidden widths must be positive, got {hidden_widths}")
    rng = np.random.default_rng(seed)
    layers = []
    fan_in = input_dim
    for width in hidden_widths:
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(width, fan_in))
        layers.append(Layer(w, np.zeros(width), np.full(width, PRELU_SLOPE_INIT)))
        fan_in = width

    if isinstance(head, ClassifierWeights):
        if head.dim != hidden_widths[-1]:
            raise ValueError(
                f"last hidden width {hidden_widths[-1]} != head dim {head.dim}")
        model_head: Union[FixedHead, TrainableHead] = FixedHead(head)
    else:
        if trainable_classes is None:
            raise ValueError("need ClassifierWeights or trainable_classes")
        d = hidden_widths[-1]
        rows = rng.normal(0.0, np.sqrt(2.0 / d), size=(trainable_classes, d))
        model_head = TrainableHead(rows)
    return MlpModel(input_dim, layers, model_head)


def forward(model: MlpModel, batch: np.ndarray):
    """Returns (features, logits, cache).  Logits are raw inner products
    against the head rows; loss kinds apply their own normalization."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ValueError(f"batch shape {x.shape}, expected (N, {model.input_dim})")
    cache = []
    act = x
    for layer in model.layers:
        pre = act @ layer.w.T + layer.b
        cache.append((act, pre))
        act = np.where(pre > 0, pre, layer.slope * pre)
    z = act @ model.head.rows.T
    return act, z, cache


def backward(model: MlpModel, cache, grad_features: np.ndarray) -> ModelGrads:
    """Backbone parameter gradients from dL/d(features).

    The head contributes through grad_features only; trainable-head row
    gradients come from the loss (see ``train``).
    """
    if len(cache) != len(model.layers):
        raise CacheError(f"cache holds {len(cache)} layers, model has "
                         f"{len(model.layers)}")
    grads = [None] * len(model.layers)
    grad_act = np.asarray(grad_features, dtype=np.float64)
    for i in reversed(range(len(model.layers))):
        layer = model.layers[i]
        x_in, pre = cache[i]
        if pre.shape[1] != layer.w.shape[0] or x_in.shape[1] != layer.w.shape[1]:
            raise CacheError(f"cache shapes stale at layer {i}")
        neg = pre < 0
        grad_pre = grad_act * np.where(neg, layer.slope, 1.0)
        grad_slope = (grad_act * pre * neg).sum(axis=0)
        grads[i] = Layer(grad_pre.T @ x_in, grad_pre.sum(axis=0), grad_slope)
        grad_act = grad_pre @ layer.w
    return ModelGrads(grads)


@dataclass
class AdamState:
    lr: float = 0.0005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def _trainable_params(model: MlpModel):
    params = []
    for layer in model.layers:
        params.extend([layer.w, layer.b, layer.slope])
    if isinstance(model.head, TrainableHead):
        params.append(model.head.rows)
    return params


def _grad_arrays(model: MlpModel, grads: ModelGrads):
    arrays = []
    for g in grads.layers:
        arrays.extend([g.w, g.b, g.slope])
    if isinstance(model.head, TrainableHead):
        if grads.head_rows is None:
            raise ValueError("trainable head requires head_rows gradient")
        arrays.append(grads.head_rows)
    return arrays


def adam_step(model: MlpModel, grads: ModelGrads, state: AdamState):
    """In-place Adam update with bias correction; fixed heads untouched."""
    params = _trainable_params(model)
    garr = _grad_arrays(model, grads)
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(garr) != len(params):
        raise ValueError("gradient/parameter count mismatch")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for p, g, m, v in zip(params, garr, state.m, state.v):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter {p.shape}")
        m += (1.0 - b1) * (g - m)
        v += (1.0 - b2) * (g * g - v)
        m_hat = m / (1.0 - b1 ** state.t)
        v_hat = v / (1.0 - b2 ** state.t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return model, state


def predict(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    """Argmax cosine similarity to head rows; ties break to the lowest index."""
    feats, _, _ = forward(model, batch)
    rows = model.head.rows
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    unit_rows = rows / np.where(norms > 0, norms, 1.0)
    return np.argmax(feats @ unit_rows.T, axis=1)


def train(model: MlpModel, data: LabeledBatch, config: TrainConfig):
    """Shuffled mini-batch training; deterministic for a fixed seed."""
    if data.labels.max() >= model.head.num_classes:
        raise losses.LabelError(
            f"label {data.labels.max()} >= K={model.head.num_classes}")
    trainable_head = isinstance(model.head, TrainableHead)
    head_arg = model.head.rows if trainable_head else model.head.weights
    state = AdamState(lr=config.lr)
    log = []
    for epoch in range(config.epochs):
        loss_sum = 0.0
        correct = 0
        for batch in batches(data, config.batch_size, config.seed, epoch):
            feats, _, cache = forward(model, batch.inputs)
            res = losses.evaluate(config.loss, head_arg, feats, batch.labels,
                                  want_weight_grad=trainable_head)
            grads = backward(model, cache, res.grad_features)
            if trainable_head:
                grads.head_rows = res.grad_weights
            adam_step(model, grads, state)
            loss_sum += res.value * len(batch)
            rows = model.head.rows
            unit = rows / np.linalg.norm(rows, axis=1, keepdims=True)
            correct += int((np.argmax(feats @ unit.T, axis=1) == batch.labels).sum())
        log.append(EpochStats(epoch, loss_sum / len(data), correct / len(data)))
    return model, log


def model_to_dict(model: MlpModel) -> dict:
    head: dict
    if isinstance(model.head, FixedHead):
        head = {"type": "fixed", "weights": weights_to_dict(model.head.weights)}
    else:
        head = {"type": "trainable",
                "rows": [list(map(float, r)) for r in model.head.rows]}
    return {
        "input_dim": model.input_dim,
        "layers": [
            {"w": [list(map(float, r)) for r in layer.w],
             "b": list(map(float, layer.b)),
             "slope": list(map(float, layer.slope))}
            for layer in model.layers
        ],
        "head": head,
    }


def model_from_dict(payload: dict) -> MlpModel:
    layers = [
        Layer(np.asarray(entry["w"], dtype=np.float64),
              np.asarray(entry["b"], dtype=np.float64),
              np.asarray(entry["slope"], dtype=np.float64))
        for entry in payload["layers"]
    ]
    head_payload = payload["head"]
    if head_payload["type"] == "fixed":
        head: Union[FixedHead, TrainableHead] = FixedHead(
            weights_from_dict(head_payload["weights"]))
    else:
        head = TrainableHead(np.asarray(head_payload["rows"], dtype=np.float64))
    return MlpModel(int(payload["input_dim"]), layers, head)


def save_checkpoint(model: MlpModel, path, extra: Optional[dict] = None) -> None:
    payload = model_to_dict(model)
    if extra:
        payload["config"] = extra
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path) -> MlpModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
