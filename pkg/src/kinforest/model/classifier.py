from dataclasses import dataclass
from typing import Any, List, Tuple

from kinforest.autodiff import Tensor, ops
from kinforest.errors import ContractError, DimensionError
from kinforest.model.params import ParameterSet


COMBINED_BLOCKS = 4


@dataclass(frozen=True)
class HeadParams:
    W1: Tensor
    b1: Tensor
    W2: Tensor
    b2: Tensor
    W3: Tensor
    b3: Tensor

    @classmethod
    def from_parameters(cls, params: ParameterSet) -> "HeadParams":
        return cls(**{name: params[f"head.{name}"] for name in ("W1", "b1", "W2", "b2", "W3", "b3")})


@dataclass(frozen=True)
class FamilyHeadParams:
    parts: List[Tuple[Tensor, Tensor]]  # (W, b) per part

    @classmethod
    def from_parameters(cls, params: ParameterSet, n_parts: int) -> "FamilyHeadParams | None":
        if f"family.part1.W" not in params:
            return None
        return cls(parts=[(params[f"family.part{j}.W"], params[f"family.part{j}.b"]) for j in range(1, n_parts + 1)])


def combine_features(F_p: Any, F_c: Any) -> Tensor:
    """[(F_p−F_c)², F_p+F_c, F_p∗F_c, F_p²−F_c²] along the last axis."""
    F_p, F_c = ops.as_tensor(F_p), ops.as_tensor(F_c)
    if F_p.shape != F_c.shape:
        raise DimensionError("combine_features", F_p.shape, F_c.shape)
    blocks = [
        ops.square(ops.sub(F_p, F_c)),
        ops.add(F_p, F_c),
        ops.mul(F_p, F_c),
        ops.sub(ops.square(F_p), ops.square(F_c)),
    ]
    return ops.concat(blocks, axis=-1)


def kinship_head(combined: Any, params: HeadParams) -> Tuple[Tensor, Tensor]:
    """Three linear layers with ReLU between them.

    Returns the logit, shape (N,), and the second hidden layer H, shape (N, h2),
    which the center loss pulls toward its class center.
    """
    combined = ops.as_tensor(combined)
    if combined.ndim != 2 or combined.shape[1] != params.W1.shape[1]:
        raise DimensionError("kinship_head", combined.shape, params.W1.shape)
    hidden = ops.relu(ops.linear(combined, params.W1, params.b1))
    H = ops.relu(ops.linear(hidden, params.W2, params.b2))
    logit = ops.linear(H, params.W3, params.b3)
    return ops.reshape(logit, (combined.shape[0],)), H


def family_id_head(F: Any, params: FamilyHeadParams, n_parts: int) -> List[Tensor]:
    """Split F into `n_parts` contiguous parts and classify each with its own map."""
    F = ops.as_tensor(F)
    width = F.shape[-1]
    if n_parts < 1 or width % n_parts != 0:
        raise ContractError(f"feature length {width} is not divisible into {n_parts} parts")
    if len(params.parts) != n_parts:
        raise ContractError(f"family head has {len(params.parts)} part maps, expected {n_parts}")

    size = width // n_parts
    logits = []
    for j, (W, b) in enumerate(params.parts):
        part = ops.index(F, (slice(None), slice(j * size, (j + 1) * size)))
        logits.append(ops.linear(part, W, b))
    return logits
