"""Dense float64 tensors and the define-by-run computation graph.

A `CompGraph` is an append-only list of `Node`s. Every primitive in
`kinforest.autodiff.ops` appends one node holding the ids of its tracked inputs
and a vector-Jacobian closure. `CompGraph.backward` walks the list in exact
reverse insertion order, so inputs always precede outputs and no topological
sort is needed.

The active graph and the no-grad switch live in context variables, which keeps
each fold worker (thread or task) confined to its own graph.
"""

from __future__ import annotations

from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Generator, List, Optional, Sequence, Tuple

import numpy as np

from kinforest.errors import ContractError


VJP = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """An n-dimensional array of 64-bit floats with an optional graph handle.

    Tensors created with `requires_grad=True` are leaves (parameters); their
    `grad` is always an array of the same shape, zero until a backward pass
    accumulates into it. Tensors produced by a recorded op carry the graph and
    node id they were recorded under.
    """

    __array_priority__ = 1000  # make ndarray <op> Tensor defer to Tensor.__r<op>__

    def __init__(self, value: Any, requires_grad: bool = False, name: str | None = None):
        self.value: np.ndarray = np.array(value, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name
        self.grad: np.ndarray | None = np.zeros_like(self.value) if requires_grad else None
        self.graph: CompGraph | None = None
        self.node_id: int | None = None

    # -- shape -----------------------------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]: return self.value.shape

    @property
    def ndim(self) -> int: return self.value.ndim

    @property
    def size(self) -> int: return int(self.value.size)

    def item(self) -> float:
        if self.value.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.value.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """A copy of the values, detached from any graph."""
        return self.value.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.value.copy())

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.value)

    @property
    def is_tracked(self) -> bool: return self.graph is not None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    # -- operator sugar (delegates to ops) ---------------------------------------------------

    def __add__(self, other: Any) -> "Tensor":
        from kinforest.autodiff import ops
        return ops.add(self, other)

    def __radd__(self, other: Any) -> "Tensor":
        from kinforest.autodiff import ops
        return ops.add(other, self)

    def __sub__(self, other: Any) -> "Tensor":
        from kinforest.autodiff import ops
        return ops.sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        from kinforest.autodiff import ops
        return ops.sub(other, self)

    def __mul__(self, other: Any) -> "Tensor":
        from kinforest.autodiff import ops
        return ops.mul(self, other)

    def __rmul__(self, other: Any) -> "Tensor":
        from kinforest.autodiff import ops
        return ops.mul(other, self)

    def __truediv__(self, other: Any) -> "Tensor":
        from kinforest.autodiff import ops
        return ops.div(self, other)

    def __rtruediv__(self, other: Any) -> "Tensor":
        from kinforest.autodiff import ops
        return ops.div(other, self)

    def __neg__(self) -> "Tensor":
        from kinforest.autodiff import ops
        return ops.mul(self, -1.0)

    def __matmul__(self, other: Any) -> "Tensor":
        from kinforest.autodiff import ops
        return ops.matmul(self, other)

    def __getitem__(self, key: Any) -> "Tensor":
        from kinforest.autodiff import ops
        return ops.index(self, key)


@dataclass
class Node:
    op: str
    inputs: Tuple[Optional[int], ...]
    vjp: VJP | None = None
    leaf: Tensor | None = None


@dataclass
class CompGraph:
    """Append-only record of the ops executed since the graph was opened."""

    nodes: List[Node] = field(default_factory=list)
    _leaf_nodes: Dict[int, int] = field(default_factory=dict)  # id(tensor) -> node id

    def __len__(self) -> int:
        return len(self.nodes)

    def track(self, tensor: Tensor) -> int | None:
        """Node id of `tensor` in this graph; registers parameters on first sight.

        Tensors recorded under another graph are constants here.
        """
        if tensor.graph is self:
            return tensor.node_id
        if tensor.requires_grad:
            key = id(tensor)
            if key not in self._leaf_nodes:
                self._leaf_nodes[key] = len(self.nodes)
                self.nodes.append(Node(op="leaf", inputs=(), leaf=tensor))
            return self._leaf_nodes[key]
        return None

    def record(self, op: str, inputs: Sequence[Tensor], value: np.ndarray, vjp: VJP) -> Tensor:
        ids = tuple(self.track(t) for t in inputs)
        out = Tensor(value)
        if all(i is None for i in ids):
            return out
        out.graph = self
        out.node_id = len(self.nodes)
        self.nodes.append(Node(op=op, inputs=ids, vjp=vjp))
        return out

    def leaves(self) -> List[Tensor]:
        return [self.nodes[i].leaf for i in self._leaf_nodes.values()]  # type: ignore[misc]

    def backward(self, loss: Tensor) -> Dict[Tensor, np.ndarray]:
        if loss.graph is not self or loss.node_id is None:
            raise ContractError("loss was not recorded on this graph")

        pending: Dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.value)}
        touched: Dict[Tensor, np.ndarray] = {}

        for node_id in range(loss.node_id, -1, -1):
            upstream = pending.pop(node_id, None)
            if upstream is None:
                continue
            node = self.nodes[node_id]

            if node.leaf is not None:
                leaf = node.leaf
                if leaf.grad is None:
                    leaf.grad = np.zeros_like(leaf.value)
                leaf.grad += upstream.reshape(leaf.value.shape)
                touched[leaf] = leaf.grad
                continue

            assert node.vjp is not None
            for input_id, grad in zip(node.inputs, node.vjp(upstream)):
                if input_id is None or grad is None:
                    continue
                if input_id in pending:
                    pending[input_id] = pending[input_id] + grad
                else:
                    pending[input_id] = grad

        return touched


# ===========================================================================================
# Active graph / no-grad context
# ===========================================================================================

_ACTIVE_GRAPH: ContextVar[CompGraph | None] = ContextVar("kinforest_active_graph", default=None)
_NO_GRAD: ContextVar[bool] = ContextVar("kinforest_no_grad", default=False)


def current_graph() -> CompGraph | None:
    """The graph ops record onto.

    None inside `no_grad()` and outside any `graph_scope()`: ops then compute
    plain values and nothing is retained.
    """
    if _NO_GRAD.get():
        return None
    return _ACTIVE_GRAPH.get()


@contextmanager
def graph_scope() -> Generator[CompGraph, None, None]:
    """Record the enclosed forward pass on a fresh graph."""
    graph = CompGraph()
    token = _ACTIVE_GRAPH.set(graph)
    try:
        yield graph
    finally:
        _ACTIVE_GRAPH.reset(token)


@contextmanager
def no_grad() -> Generator[None, None, None]:
    token = _NO_GRAD.set(True)
    try:
        yield
    finally:
        _NO_GRAD.reset(token)


def backward(loss: Tensor) -> Dict[Tensor, np.ndarray]:
    """Accumulate d(loss)/d(leaf) into the `.grad` of every reachable parameter.

    A loss with no recorded history is a constant: every gradient stays zero and
    the returned map is empty.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.graph is None:
        return {}
    return loss.graph.backward(loss)


def zero_grads(params: Any) -> None:
    """Reset the gradient of every tensor in an iterable or mapping of tensors."""
    tensors = params.values() if hasattr(params, "values") else params
    for tensor in tensors:
        tensor.zero_grad()
