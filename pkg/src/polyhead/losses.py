"""Softmax loss family over polytope classifier heads.

Four variants, each returning the batch-mean loss and the analytic
gradient with respect to the raw feature batch:

  * plain cross-entropy on arbitrary logits (with optional bias),
  * cross-entropy on inner products against fixed unit weights,
  * scale-kappa cross-entropy on unit-normalized features (cosine logits),
  * additive angular margin on the target-class cosine.

The scaled variants read as von Mises-Fisher class-conditionals with
concentration kappa; kappa defaults to 30 and is never trained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .polytope import ClassifierWeights

KAPPA_DEFAULT = 30.0
NORM_FLOOR = 1e-12
SIN_FLOOR = 1e-7


class DimensionError(ValueError):
    """Shape mismatch between features, weights or labels."""


class LabelError(ValueError):
    """Label outside [0, K)."""


class DegenerateFeatureError(ValueError):
    """Feature norm at or below the normalization floor."""


class MarginError(ValueError):
    """Margin outside [0, pi)."""


@dataclass(frozen=True)
class PlainCE:
    pass


@dataclass(frozen=True)
class FixedSoftmax:
    pass


@dataclass(frozen=True)
class NormScaled:
    kappa: float = KAPPA_DEFAULT

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")


@dataclass(frozen=True)
class AngularMargin:
    kappa: float = KAPPA_DEFAULT
    m: float = 0.0

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not (0.0 <= self.m < math.pi):
            raise MarginError(f"margin must lie in [0, pi), got {self.m}")


LossKind = Union[PlainCE, FixedSoftmax, NormScaled, AngularMargin]


@dataclass
class LossResult:
    value: float
    grad_features: np.ndarray  # dL/df, same shape as the input batch
    per_sample: np.ndarray
    grad_weights: Optional[np.ndarray] = None  # dL/d(raw head rows), trainable heads only


def _rows_of(weights) -> np.ndarray:
    if isinstance(weights, ClassifierWeights):
        return weights.rows
    return np.asarray(weights, dtype=np.float64)


def _check_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= num_classes:
        raise LabelError(f"labels must lie in [0, {num_classes})")
    return labels.astype(np.int64)


def logits(weights: ClassifierWeights, features: np.ndarray,
           bias: Optional[np.ndarray] = None) -> np.ndarray:
    """Inner-product scores z[n, j] = w_j . f_n + b_j (bias defaults to 0)."""
    features = np.asarray(features, dtype=np.float64)
    rows = _rows_of(weights)
    if features.ndim != 2 or features.shape[1] != rows.shape[1]:
        raise DimensionError(
            f"feature dim {features.shape} incompatible with head dim {rows.shape[1]}")
    z = features @ rows.T
    if bias is not None:
        bias = np.asarray(bias, dtype=np.float64)
        if bias.shape != (rows.shape[0],):
            raise DimensionError(f"bias shape {bias.shape}, expected ({rows.shape[0]},)")
        z = z + bias
    return z


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def plain_ce(z: np.ndarray, labels: np.ndarray) -> LossResult:
    """Mean cross-entropy; gradient is with respect to the logits."""
    z = np.asarray(z, dtype=np.float64)
    labels = _check_labels(labels, z.shape[1])
    n = z.shape[0]
    logp = _log_softmax(z)
    per_sample = -logp[np.arange(n), labels]
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return LossResult(float(per_sample.mean()), grad, per_sample)


def fixed_softmax_loss(weights, features: np.ndarray, labels: np.ndarray,
                       want_weight_grad: bool = False) -> LossResult:
    """Cross-entropy over raw-feature inner products with unit head rows."""
    rows, unit_rows, chain = _unit_rows(weights)
    z = np.asarray(features, dtype=np.float64) @ unit_rows.T
    res = plain_ce(z, labels)
    grad_z = res.grad_features
    res.grad_features = grad_z @ unit_rows
    if want_weight_grad:
        res.grad_weights = chain(grad_z.T @ np.asarray(features, dtype=np.float64))
    return res


def _normalize_features(features: np.ndarray):
    features = np.asarray(features, dtype=np.float64)
    norms = np.linalg.norm(features, axis=1, keepdims=True)
    if np.any(norms <= NORM_FLOOR):
        raise DegenerateFeatureError(
            f"feature norm at or below {NORM_FLOOR}; cannot normalize")
    return features, norms, features / norms


def _chain_normalization(grad_unit: np.ndarray, unit: np.ndarray,
                         norms: np.ndarray) -> np.ndarray:
    # Jacobian of v -> v/|v| applied to grad_unit: (I - u u^T)/|v|
    radial = (grad_unit * unit).sum(axis=1, keepdims=True)
    return (grad_unit - radial * unit) / norms


def _unit_rows(weights):
    """Unit head rows plus a chain closure mapping d/d(unit) to d/d(raw).

    Fixed heads (ClassifierWeights) are unit already; the closure is then
    the identity and its output is unused.
    """
    rows = _rows_of(weights)
    if isinstance(weights, ClassifierWeights):
        return rows, rows, lambda g: g
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    if np.any(norms <= NORM_FLOOR):
        raise DegenerateFeatureError("trainable head row with near-zero norm")
    unit = rows / norms

    def chain(grad_unit: np.ndarray) -> np.ndarray:
        radial = (grad_unit * unit).sum(axis=1, keepdims=True)
        return (grad_unit - radial * unit) / norms

    return rows, unit, chain


def norm_scaled_loss(weights, features: np.ndarray, labels: np.ndarray,
                     kappa: float = KAPPA_DEFAULT,
                     want_weight_grad: bool = False) -> LossResult:
    """Cross-entropy on kappa-scaled cosine logits kappa * cos(theta_j)."""
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    rows, unit_rows, chain = _unit_rows(weights)
    features, norms, unit_f = _normalize_features(features)
    if unit_f.shape[1] != unit_rows.shape[1]:
        raise DimensionError(
            f"feature dim {unit_f.shape[1]} != head dim {unit_rows.shape[1]}")
    z = kappa * (unit_f @ unit_rows.T)
    res = plain_ce(z, labels)
    grad_cos = kappa * res.grad_features
    res.grad_features = _chain_normalization(grad_cos @ unit_rows, unit_f, norms)
    if want_weight_grad:
        res.grad_weights = chain(grad_cos.T @ unit_f)
    return res


def margin_loss(weights, features: np.ndarray, labels: np.ndarray,
                kappa: float = KAPPA_DEFAULT, m: float = 0.0,
                want_weight_grad: bool = False) -> LossResult:
    """Additive angular margin: the target-class logit is kappa*cos(theta_y + m).

    cos(theta_y + m) is computed with the angle-addition identity on the
    clipped cosine, so m = 0 reduces exactly to the scaled-cosine loss.
    Past theta_y + m = pi the logit is held at -kappa with zero slope, and
    the d cos(theta+m)/d cos(theta) factor uses a sin(theta) floor.
    """
    if not (0.0 <= m < math.pi):
        raise MarginError(f"margin must lie in [0, pi), got {m}")
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    rows, unit_rows, chain = _unit_rows(weights)
    features, norms, unit_f = _normalize_features(features)
    if unit_f.shape[1] != unit_rows.shape[1]:
        raise DimensionError(
            f"feature dim {unit_f.shape[1]} != head dim {unit_rows.shape[1]}")
    cos = unit_f @ unit_rows.T
    labels = _check_labels(labels, unit_rows.shape[0])
    idx = np.arange(cos.shape[0])

    cos_m, sin_m = math.cos(m), math.sin(m)
    c_y = np.clip(cos[idx, labels], -1.0, 1.0)
    sin_y = np.sqrt(np.maximum(0.0, 1.0 - c_y * c_y))
    past_pi = (m > 0.0) & (c_y < -cos_m)  # theta_y + m > pi
    cos_shift = np.where(past_pi, -1.0, c_y * cos_m - sin_y * sin_m)
    slope = np.where(past_pi, 0.0,
                     cos_m + sin_m * c_y / np.maximum(sin_y, SIN_FLOOR))

    z = kappa * cos
    z[idx, labels] = kappa * cos_shift
    res = plain_ce(z, labels)
    grad_cos = kappa * res.grad_features
    grad_cos[idx, labels] *= slope
    res.grad_features = _chain_normalization(grad_cos @ unit_rows, unit_f, norms)
    if want_weight_grad:
        res.grad_weights = chain(grad_cos.T @ unit_f)
    return res


def maximal_margin(weights: ClassifierWeights) -> float:
    """Largest admissible margin: the head's closed-form vertex angle."""
    return weights.phi


def evaluate(kind: LossKind, weights, features: np.ndarray, labels: np.ndarray,
             want_weight_grad: bool = False) -> LossResult:
    """Dispatch a loss kind against a head (fixed or raw trainable rows)."""
    if isinstance(kind, PlainCE):
        rows = _rows_of(weights)
        features = np.asarray(features, dtype=np.float64)
        if features.shape[1] != rows.shape[1]:
            raise DimensionError(
                f"feature dim {features.shape[1]} != head dim {rows.shape[1]}")
        res = plain_ce(features @ rows.T, labels)
        grad_z = res.grad_features
        res.grad_features = grad_z @ rows
        if want_weight_grad:
            res.grad_weights = grad_z.T @ features
        return res
    if isinstance(kind, FixedSoftmax):
        return fixed_softmax_loss(weights, features, labels, want_weight_grad)
    if isinstance(kind, NormScaled):
        return norm_scaled_loss(weights, features, labels, kind.kappa,
                                want_weight_grad)
    if isinstance(kind, AngularMargin):
        return margin_loss(weights, features, labels, kind.kappa, kind.m,
                           want_weight_grad)
    raise TypeError(f"unknown loss kind {kind!r}")


def grad_check(kind: LossKind, weights, features: np.ndarray,
               labels: np.ndarray, step: float = 1e-6) -> float:
    """Max relative error of the analytic feature gradient vs central differences."""
    features = np.asarray(features, dtype=np.float64)
    analytic = evaluate(kind, weights, features, labels).grad_features
    worst = 0.0
    for n in range(features.shape[0]):
        for j in range(features.shape[1]):
            bumped = features.copy()
            bumped[n, j] += step
            hi = evaluate(kind, weights, bumped, labels).value
            bumped[n, j] -= 2.0 * step
            lo = evaluate(kind, weights, bumped, labels).value
            numeric = (hi - lo) / (2.0 * step)
            denom = max(1e-8, abs(analytic[n, j]) + abs(numeric))
            worst = max(worst, abs(analytic[n, j] - numeric) / denom)
    return worst
