"""The forest of nine paired two-node graphs and its residual gated layers.

All graphs of a batch are processed together: node and edge states have shape
(9, N, d_h), axis 0 being the graph (patch kind). Per-graph weights have shape
(9, d_h, d_h); shared weights (d_h, d_h) apply to every graph.

One layer, for the parent node (the child mirrors it with roles swapped):

    ê_p   = C e_p + D h_p + E h_c
    η_p   = σ(ê_p) / (σ(ê_p) + σ(ê_c))
    h_p'  = h_p + relu(A h_p + η_p ⊙ B h_c)
    e_p'  = e_p + relu(h_p)
"""

from dataclasses import dataclass, field
from typing import Any, List, Tuple

import numpy as np

from kinforest.autodiff import Tensor, ops
from kinforest.data.patch_kind import GRAPH_COUNT
from kinforest.errors import ContractError, DimensionError
from kinforest.model.params import LAYER_MATRICES, ParameterSet


@dataclass(frozen=True)
class GatedLayerParams:
    A: Tensor
    B: Tensor
    C: Tensor
    D: Tensor
    E: Tensor

    @classmethod
    def from_parameters(cls, params: ParameterSet, layer: int) -> "GatedLayerParams":
        return cls(**{m: params[f"forest.layer{layer}.{m}"] for m in LAYER_MATRICES})


@dataclass(frozen=True)
class ForestParams:
    layers: List[GatedLayerParams]
    projection: Tensor | None = None

    @classmethod
    def from_parameters(cls, params: ParameterSet, n_layers: int) -> "ForestParams":
        return cls(
            layers=[GatedLayerParams.from_parameters(params, l) for l in range(1, n_layers + 1)],
            projection=params.get("forest.proj"),
        )


@dataclass
class ForestState:
    """Per-layer node and edge states; index 0 holds the layer inputs h⁰, e⁰."""

    h_parent: List[Tensor] = field(default_factory=list)
    h_child: List[Tensor] = field(default_factory=list)
    e_parent: List[Tensor] = field(default_factory=list)
    e_child: List[Tensor] = field(default_factory=list)

    @property
    def layer_count(self) -> int: return len(self.h_parent) - 1


def gate(e_p: Any, e_c: Any) -> Tensor:
    """σ(e_p) / (σ(e_p) + σ(e_c)), elementwise in (0, 1)."""
    e_p, e_c = ops.as_tensor(e_p), ops.as_tensor(e_c)
    if e_p.shape != e_c.shape:
        raise DimensionError("gate", e_p.shape, e_c.shape)
    s_p = ops.sigmoid(e_p)
    return ops.div(s_p, ops.add(s_p, ops.sigmoid(e_c)))


def gated_layer_forward(h_p: Tensor, h_c: Tensor, e_p: Tensor, e_c: Tensor, params: GatedLayerParams) -> Tuple[Tensor, Tensor, Tensor, Tensor]:
    if not (h_p.shape == h_c.shape == e_p.shape == e_c.shape):
        raise DimensionError("gated_layer", h_p.shape, h_c.shape, e_p.shape, e_c.shape)

    pre_p = ops.add(ops.add(ops.linear(e_p, params.C), ops.linear(h_p, params.D)), ops.linear(h_c, params.E))
    pre_c = ops.add(ops.add(ops.linear(e_c, params.C), ops.linear(h_c, params.D)), ops.linear(h_p, params.E))

    eta_p = gate(pre_p, pre_c)
    eta_c = gate(pre_c, pre_p)

    h_p_next = ops.add(h_p, ops.relu(ops.add(ops.linear(h_p, params.A), ops.mul(eta_p, ops.linear(h_c, params.B)))))
    h_c_next = ops.add(h_c, ops.relu(ops.add(ops.linear(h_c, params.A), ops.mul(eta_c, ops.linear(h_p, params.B)))))

    e_p_next = ops.add(e_p, ops.relu(h_p))
    e_c_next = ops.add(e_c, ops.relu(h_c))
    return h_p_next, h_c_next, e_p_next, e_c_next


def _as_batched(x: Any) -> Tensor:
    x = ops.as_tensor(x)
    if x.ndim == 2:
        x = ops.reshape(x, (x.shape[0], 1, x.shape[1]))
    if x.ndim != 3 or x.shape[0] != GRAPH_COUNT:
        raise ContractError(f"expected {GRAPH_COUNT} paired graphs, got input of shape {x.shape}")
    return x


def forest_forward(x_parent: Any, x_child: Any, params: ForestParams) -> ForestState:
    """Run every gated layer on all nine graphs.

    Inputs are (9, N, d_in), or (9, d_in) for a single forest.
    """
    x_p, x_c = _as_batched(x_parent), _as_batched(x_child)
    if x_p.shape != x_c.shape:
        raise DimensionError("forest_forward", x_p.shape, x_c.shape)

    if params.projection is not None:
        h_p, h_c = ops.linear(x_p, params.projection), ops.linear(x_c, params.projection)
    else:
        h_p, h_c = x_p, x_c
    d_h = params.layers[0].A.shape[-1] if params.layers else h_p.shape[-1]
    if h_p.shape[-1] != d_h:
        raise DimensionError("forest_forward.projection", h_p.shape, (d_h,))

    e_p = Tensor(np.zeros(h_p.shape))
    e_c = Tensor(np.zeros(h_c.shape))

    state = ForestState([h_p], [h_c], [e_p], [e_c])
    for layer in params.layers:
        h_p, h_c, e_p, e_c = gated_layer_forward(h_p, h_c, e_p, e_c, layer)
        state.h_parent.append(h_p)
        state.h_child.append(h_c)
        state.e_parent.append(e_p)
        state.e_child.append(e_c)
    return state


def readout(state: ForestState) -> Tuple[Tensor, Tensor]:
    """(F_p, F_c), each (N, L·d_h): per layer the mean over the nine graphs, layers concatenated."""
    if state.layer_count < 1:
        raise ContractError("readout needs at least one computed layer")

    def side(hidden: List[Tensor]) -> Tensor:
        per_layer = [ops.mean(h, axis=0) for h in hidden[1:]]
        return ops.concat(per_layer, axis=-1)

    return side(state.h_parent), side(state.h_child)
