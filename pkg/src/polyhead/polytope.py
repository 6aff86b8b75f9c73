"""Regular-polytope classifier weight matrices.

In dimension d >= 5 exactly three regular polytopes exist: the d-simplex
(d+1 vertices), the d-orthoplex (2d vertices) and the d-cube (2^d
vertices).  Their vertex sets, unit-normalized, serve as fixed (frozen)
classifier weight rows.  Each family has a constant nearest-neighbour
angle `phi` with a closed form, which downstream code uses as the maximal
additive angular margin.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

DEFAULT_TOL = 1e-10


class PolytopeKind(Enum):
    SIMPLEX = "simplex"
    ORTHOPLEX = "orthoplex"
    CUBE = "cube"


class ClassCountError(ValueError):
    """Raised when the requested number of classes is below 2."""


class StructuralError(ValueError):
    """Raised when a weight matrix is malformed (shape, finiteness)."""


@dataclass(frozen=True)
class ClassifierWeights:
    """K unit-norm polytope vertices in d dimensions plus their angle phi."""

    kind: PolytopeKind
    num_classes: int
    dim: int
    rows: np.ndarray  # shape (K, d), unit rows
    phi: float


@dataclass(frozen=True)
class GeometryCheck:
    passed: bool
    worst_deviation: float
    min_angle: float
    message: str = ""


def embedding_dim(kind: PolytopeKind, num_classes: int) -> int:
    """Smallest feature dimension whose polytope has >= K vertices.

    Simplex: K-1.  Orthoplex: ceil(K/2).  Cube: ceil(log2 K).
    """
    if num_classes < 2:
        raise ClassCountError(f"need at least 2 classes, got {num_classes}")
    if kind is PolytopeKind.SIMPLEX:
        return num_classes - 1
    if kind is PolytopeKind.ORTHOPLEX:
        return -(-num_classes // 2)
    return (num_classes - 1).bit_length()


def expected_angle(kind: PolytopeKind, dim: int) -> float:
    """Closed-form nearest-neighbour vertex angle for each family."""
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    if kind is PolytopeKind.SIMPLEX:
        return math.acos(-1.0 / dim)
    if kind is PolytopeKind.ORTHOPLEX:
        return math.pi / 2.0
    return math.acos((dim - 2.0) / dim)


def _finalize(kind: PolytopeKind, num_classes: int, rows: np.ndarray) -> ClassifierWeights:
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    rows.setflags(write=False)
    dim = rows.shape[1]
    return ClassifierWeights(
        kind=kind,
        num_classes=num_classes,
        dim=dim,
        rows=rows,
        phi=expected_angle(kind, dim),
    )


def _resolve_dim(kind: PolytopeKind, num_classes: int, dim) -> int:
    minimum = embedding_dim(kind, num_classes)
    if dim is None:
        return minimum
    if dim < minimum:
        raise ValueError(
            f"{kind.value} needs at least {minimum} dims for {num_classes} "
            f"classes, got {dim}")
    return int(dim)


def make_simplex(num_classes: int, dim: int | None = None) -> ClassifierWeights:
    """Regular simplex: K unit vertices in d = K-1 dims, pairwise cosine -1/d.

    Built from the d standard basis vectors plus alpha * sum(e_i) with
    alpha = (1 - sqrt(d+1)) / d, then centroid-shifted and unit-normalized
    (in that order).  A larger ``dim`` takes the first K vertices of the
    bigger simplex.
    """
    dim = _resolve_dim(PolytopeKind.SIMPLEX, num_classes, dim)
    alpha = (1.0 - math.sqrt(dim + 1.0)) / dim
    verts = np.vstack([np.eye(dim), alpha * np.ones((1, dim))])
    verts -= verts.mean(axis=0)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    return _finalize(PolytopeKind.SIMPLEX, num_classes, verts[:num_classes])


def make_orthoplex(num_classes: int, dim: int | None = None) -> ClassifierWeights:
    """Orthoplex: first K of (+e1, -e1, +e2, -e2, ...) in d = ceil(K/2) dims."""
    dim = _resolve_dim(PolytopeKind.ORTHOPLEX, num_classes, dim)
    verts = np.zeros((num_classes, dim))
    for i in range(num_classes):
        verts[i, i // 2] = 1.0 if i % 2 == 0 else -1.0
    return _finalize(PolytopeKind.ORTHOPLEX, num_classes, verts)


def make_cube(num_classes: int, dim: int | None = None) -> ClassifierWeights:
    """Hypercube: first K sign patterns of (+-1/sqrt(d))^d, d = ceil(log2 K).

    Sign vectors are enumerated lexicographically with -1 before +1 in
    every coordinate, making the K < 2^d subset deterministic.
    """
    dim = _resolve_dim(PolytopeKind.CUBE, num_classes, dim)
    scale = 1.0 / math.sqrt(dim)
    verts = np.empty((num_classes, dim))
    for i in range(num_classes):
        for j in range(dim):
            bit = (i >> (dim - 1 - j)) & 1
            verts[i, j] = scale if bit else -scale
    return _finalize(PolytopeKind.CUBE, num_classes, verts)


_MAKERS = {
    PolytopeKind.SIMPLEX: make_simplex,
    PolytopeKind.ORTHOPLEX: make_orthoplex,
    PolytopeKind.CUBE: make_cube,
}


def make_weights(kind: PolytopeKind, num_classes: int) -> ClassifierWeights:
    return _MAKERS[kind](num_classes)


def pairwise_angles(rows: np.ndarray) -> np.ndarray:
    """Angles between all distinct row pairs, as a flat array."""
    gram = np.clip(rows @ rows.T, -1.0, 1.0)
    iu = np.triu_indices(rows.shape[0], k=1)
    return np.arccos(gram[iu])


def verify_geometry(weights: ClassifierWeights, tol: float = DEFAULT_TOL) -> GeometryCheck:
    """Check unit norms and the nearest-neighbour angle against phi.

    The minimum pairwise angle must equal phi within tol; for the simplex
    every pairwise angle must equal phi.  A 2-class orthoplex has only the
    antipodal pair, whose angle is pi rather than phi = pi/2; that single
    configuration is accepted as-is.
    """
    rows = np.asarray(weights.rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape != (weights.num_classes, weights.dim):
        raise StructuralError(f"rows shape {rows.shape} does not match "
                              f"(K={weights.num_classes}, d={weights.dim})")
    if weights.num_classes < 2:
        raise StructuralError("fewer than 2 rows")
    if not np.all(np.isfinite(rows)):
        raise StructuralError("non-finite entries in weight rows")

    norm_dev = float(np.max(np.abs(np.linalg.norm(rows, axis=1) - 1.0)))
    angles = pairwise_angles(rows)
    min_angle = float(angles.min())

    if weights.kind is PolytopeKind.ORTHOPLEX and weights.num_classes == 2:
        angle_dev = float(abs(min_angle - math.pi))
    elif weights.kind is PolytopeKind.SIMPLEX:
        angle_dev = float(np.max(np.abs(angles - weights.phi)))
    else:
        angle_dev = float(abs(min_angle - weights.phi))

    worst = max(norm_dev, angle_dev)
    if norm_dev > tol:
        return GeometryCheck(False, worst, min_angle,
                             f"row norm deviates by {norm_dev:.3e}")
    if angle_dev > tol:
        return GeometryCheck(False, worst, min_angle,
                             f"pairwise angle deviates by {angle_dev:.3e}")
    return GeometryCheck(True, worst, min_angle)


def to_dict(weights: ClassifierWeights) -> dict:
    return {
        "kind": weights.kind.value,
        "K": weights.num_classes,
        "d": weights.dim,
        "phi": weights.phi,
        "rows": [list(map(float, row)) for row in weights.rows],
    }


def from_dict(payload: dict) -> ClassifierWeights:
    kind = PolytopeKind(payload["kind"])
    rows = np.asarray(payload["rows"], dtype=np.float64)
    if rows.ndim != 2 or rows.shape != (payload["K"], payload["d"]):
        raise StructuralError(f"rows shape {rows.shape} inconsistent with header")
    rows.setflags(write=False)
    return ClassifierWeights(
        kind=kind,
        num_classes=int(payload["K"]),
        dim=int(payload["d"]),
        rows=rows,
        phi=float(payload["phi"]),
    )


def save_json(weights: ClassifierWeights, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_dict(weights), fh)


def load_json(path) -> ClassifierWeights:
    with open(path) as fh:
        return from_dict(json.load(fh))
