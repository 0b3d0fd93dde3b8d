from kinforest.autodiff import ops
from kinforest.autodiff.gradient_check import GradientCheckReport, gradient_check, relative_error
from kinforest.autodiff.tensor import (
    CompGraph, Node, Tensor, backward, current_graph, graph_scope, no_grad, zero_grads
)


__all__ = [
    "CompGraph",
    "GradientCheckReport",
    "Node",
    "Tensor",
    "backward",
    "current_graph",
    "gradient_check",
    "graph_scope",
    "no_grad",
    "ops",
    "relative_error",
    "zero_grads",
]
