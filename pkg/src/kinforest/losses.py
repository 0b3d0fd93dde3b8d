"""Loss terms and their temperature-scheduled fusion.

Term names used throughout training and reports:

    bce        kinship binary cross-entropy
    cross_pos  kin-pair cross-generation gap
    cross_neg  non-kin-pair cross-generation gap
    direction  cosine agreement with the ±1 label
    triplet    batch-all triplet loss over parent and child features
    family     part-based family-ID cross-entropy (summed over parts)
    center     center loss on the classifier's second hidden layer
"""

import logging

from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Sequence

import numpy as np

from kinforest.autodiff import Tensor, ops
from kinforest.errors import ContractError, DimensionError, PreconditionError
from kinforest.run_config import RunConfig


logger = logging.getLogger(__name__)

NORM_GUARD = 1e-12
TERMS = ("bce", "cross_pos", "cross_neg", "direction", "triplet", "family", "center")


def _labels(y: Any, n: int, op: str) -> np.ndarray:
    labels = np.asarray(y.value if isinstance(y, Tensor) else y, dtype=np.float64).reshape(-1)
    if labels.shape[0] != n:
        raise DimensionError(op, (n,), labels.shape)
    return labels


def kin_bce_loss(logits: Any, y: Any) -> Tensor:
    """Mean BCE on logits, as softplus(z) − y·z."""
    logits = ops.as_tensor(logits)
    if logits.size == 0:
        raise PreconditionError("kin_bce_loss on an empty batch")
    if logits.ndim != 1:
        raise DimensionError("kin_bce_loss", logits.shape)
    labels = _labels(y, logits.shape[0], "kin_bce_loss")
    return ops.mean(ops.sub(ops.softplus(logits), ops.mul(logits, Tensor(labels))))


def family_id_loss(part_logits: Sequence[Tensor], z: Any) -> Tensor:
    """Mean over parts and images of the cross-entropy at the true family."""
    if not part_logits:
        raise PreconditionError("family_id_loss needs at least one part")
    labels = np.asarray(z, dtype=np.intp).reshape(-1)

    losses = []
    for logits in part_logits:
        if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
            raise DimensionError("family_id_loss", logits.shape, labels.shape)
        classes = logits.shape[1]
        if labels.size and (labels.min() < 0 or labels.max() >= classes):
            raise ContractError(f"family label out of range [0, {classes}): {labels.min()}..{labels.max()}")
        one_hot = np.eye(classes)[labels]
        picked = ops.sum(ops.mul(ops.log_softmax(logits, axis=1), Tensor(one_hot)), axis=1)
        losses.append(ops.mul(ops.mean(picked), -1.0))
    return ops.reduce_mean(losses)


def triplet_indices(labels: np.ndarray) -> np.ndarray:
    """(k, 3) array of every valid (anchor, positive, negative) index triple."""
    labels = np.asarray(labels).reshape(-1)
    same = labels[:, None] == labels[None, :]
    distinct = ~np.eye(labels.shape[0], dtype=bool)
    valid = (same & distinct)[:, :, None] & ~same[:, None, :]
    return np.argwhere(valid)


def triplet_loss(features: Any, family_ids: Any, margin: float = 0.0) -> Tensor:
    """Batch-all triplet loss, averaged over triplets whose loss is positive.

    Returns a constant 0 when the batch holds no valid triplet or none violates
    the margin.
    """
    features = ops.as_tensor(features)
    if features.ndim != 2:
        raise DimensionError("triplet_loss", features.shape)
    labels = np.asarray(family_ids).reshape(-1)
    if labels.shape[0] != features.shape[0]:
        raise DimensionError("triplet_loss", features.shape, labels.shape)

    triples = triplet_indices(labels)
    if triples.shape[0] == 0:
        return Tensor(0.0)

    n = features.shape[0]
    distances = ops.pairwise_sq_dists(features)
    anchor_positive = ops.gather(distances, triples[:, 0] * n + triples[:, 1])
    anchor_negative = ops.gather(distances, triples[:, 0] * n + triples[:, 2])
    hinge = ops.relu(ops.add(ops.sub(anchor_positive, anchor_negative), margin))

    active = int(np.count_nonzero(hinge.value > 0))
    if active == 0:
        return ops.sum(hinge)
    return ops.mul(ops.sum(hinge), 1.0 / active)


def _pair_sq_gap(F_p: Tensor, F_c: Tensor, op: str) -> Tensor:
    if F_p.shape != F_c.shape or F_p.ndim != 2:
        raise DimensionError(op, F_p.shape, F_c.shape)
    return ops.sum(ops.square(ops.sub(F_p, F_c)), axis=1)


def cross_generation_loss(F_p: Any, F_c: Any, y: Any, omega_pos: float, omega_neg: float) -> Tensor:
    """ω_pos·mean(y·‖F_p−F_c‖²) + ω_neg·mean((1−y)·‖F_p−F_c‖²)."""
    F_p, F_c = ops.as_tensor(F_p), ops.as_tensor(F_c)
    gap = _pair_sq_gap(F_p, F_c, "cross_generation_loss")
    labels = _labels(y, F_p.shape[0], "cross_generation_loss")

    total: Tensor = Tensor(0.0)
    if omega_pos != 0:
        total = ops.add(total, ops.mul(ops.mean(ops.mul(gap, Tensor(labels))), omega_pos))
    if omega_neg != 0:
        total = ops.add(total, ops.mul(ops.mean(ops.mul(gap, Tensor(1.0 - labels))), omega_neg))
    return total


def cosine_similarity(F_p: Tensor, F_c: Tensor) -> Tensor:
    dot = ops.sum(ops.mul(F_p, F_c), axis=1)
    norm_p = ops.sqrt(ops.add(ops.sum(ops.square(F_p), axis=1), NORM_GUARD))
    norm_c = ops.sqrt(ops.add(ops.sum(ops.square(F_c), axis=1), NORM_GUARD))
    return ops.div(dot, ops.mul(norm_p, norm_c))


def direction_loss(F_p: Any, F_c: Any, y: Any) -> Tensor:
    """mean((cos(F_p, F_c) − s)²) with s = +1 for kin, −1 for non-kin."""
    F_p, F_c = ops.as_tensor(F_p), ops.as_tensor(F_c)
    if F_p.shape != F_c.shape or F_p.ndim != 2:
        raise DimensionError("direction_loss", F_p.shape, F_c.shape)
    signs = 2.0 * _labels(y, F_p.shape[0], "direction_loss") - 1.0
    return ops.mean(ops.square(ops.sub(cosine_similarity(F_p, F_c), Tensor(signs))))


def center_loss(H: Any, y: Any, centers: Tensor) -> Tensor:
    """½ Σ_i ‖H_i − C_{y_i}‖², a sum over the batch."""
    H = ops.as_tensor(H)
    if H.ndim != 2 or centers.ndim != 2 or H.shape[1] != centers.shape[1]:
        raise DimensionError("center_loss", H.shape, centers.shape)
    labels = _labels(y, H.shape[0], "center_loss").astype(np.intp)
    one_hot = np.eye(centers.shape[0])[labels]
    assigned = ops.matmul(Tensor(one_hot), centers)
    return ops.mul(ops.sum_sq(ops.sub(H, assigned)), 0.5)


# ===========================================================================================
# Fusion
# ===========================================================================================

@dataclass(frozen=True)
class FusionConfig:
    """Weights of the fused objective at epoch t."""

    omega0: float = 0.01
    alpha: float = 1.05
    t: int = 0
    weights: Mapping[str, float] = field(default_factory=lambda: {
        "bce": 1.0, "cross_pos": 1.0, "cross_neg": 1.0, "direction": 1.0, "triplet": 1.0, "family": 1.0,
    })
    omega_pos: float = 1.0
    omega_neg: float = -1.0
    margin: float = 0.0

    def __post_init__(self) -> None:
        if self.alpha < 1:
            raise PreconditionError(f"alpha must be >= 1, got {self.alpha}")
        if self.margin < 0:
            raise PreconditionError(f"margin must be >= 0, got {self.margin}")
        if self.t < 0:
            raise PreconditionError(f"epoch counter must be >= 0, got {self.t}")

    @property
    def center_weight(self) -> float:
        return self.omega0 * self.alpha ** self.t

    def weight(self, term: str) -> float:
        if term == "center":
            return self.center_weight
        return float(self.weights.get(term, 0.0))

    def at_epoch(self, t: int) -> "FusionConfig":
        return FusionConfig(self.omega0, self.alpha, t, self.weights, self.omega_pos, self.omega_neg, self.margin)

    @classmethod
    def from_run_config(cls, cfg: RunConfig, t: int = 0) -> "FusionConfig":
        return cls(
            omega0=cfg.omega0,
            alpha=cfg.alpha,
            t=t,
            weights={
                "bce": cfg.omega1, "cross_pos": cfg.omega2, "cross_neg": cfg.omega3,
                "direction": cfg.omega4, "triplet": cfg.omega5, "family": cfg.omega6,
            },
            omega_pos=cfg.omega_pos,
            omega_neg=cfg.omega_neg,
            margin=cfg.margin,
        )


def fuse_losses(terms: Mapping[str, Tensor], cfg: FusionConfig) -> Tensor:
    """ω₀·αᵗ·L_center + Σ ωᵢ·Lᵢ; terms with zero weight are left out entirely."""
    total: Tensor | None = None
    for name, term in terms.items():
        if name not in TERMS:
            raise ContractError(f"unknown loss term '{name}'")
        weight = cfg.weight(name)
        if weight == 0:
            continue
        weighted = ops.mul(term, weight)
        total = weighted if total is None else ops.add(total, weighted)
    return total if total is not None else Tensor(0.0)


def component_values(terms: Mapping[str, Tensor]) -> Dict[str, float]:
    return {name: term.item() for name, term in terms.items()}
