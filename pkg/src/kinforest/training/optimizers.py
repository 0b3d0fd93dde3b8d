"""Adam for the network and plain SGD for the class centers.

Both keep their state in dicts keyed by parameter name and update the
parameter arrays in place.
"""

import logging

from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from kinforest.autodiff import Tensor
from kinforest.errors import DimensionError, NonFiniteGradientError


logger = logging.getLogger(__name__)


def _checked_grad(name: str, tensor: Tensor) -> np.ndarray:
    grad = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.value)
    if grad.shape != tensor.shape:
        raise DimensionError(f"gradient of {name}", grad.shape, tensor.shape)
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradientError(name)
    return grad


@dataclass
class Adam:
    lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    def step(self, params: Mapping[str, Tensor], lr: float | None = None) -> None:
        """One bias-corrected update of every parameter from its `.grad`.

        All gradients are checked before any parameter moves.
        """
        grads = {name: _checked_grad(name, tensor) for name, tensor in params.items()}

        self.t += 1
        rate = self.lr if lr is None else lr
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        step_size = rate / bc1

        for name, tensor in params.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(tensor.value)
                self.v[name] = np.zeros_like(tensor.value)

            self.m[name] *= self.beta1
            self.m[name] += (1.0 - self.beta1) * g
            self.v[name] *= self.beta2
            self.v[name] += (1.0 - self.beta2) * (g * g)

            denom = np.sqrt(self.v[name] / bc2) + self.epsilon
            tensor.value -= step_size * self.m[name] / denom


@dataclass
class SGD:
    lr: float = 0.5
    steps: int = 0

    def step(self, params: Mapping[str, Tensor], grad_scale: float | np.ndarray = 1.0) -> None:
        grads = {name: _checked_grad(name, tensor) for name, tensor in params.items()}
        self.steps += 1
        for name, tensor in params.items():
            tensor.value -= self.lr * grad_scale * grads[name]


def center_step(
    centers: Mapping[str, Tensor], fusion_weight: float, optimizer: SGD, counts: np.ndarray | None = None
) -> bool:
    """Apply the center optimizer to gradients divided by the fusion weight ω₀αᵗ.

    The update then equals the one produced by the unweighted center loss.
    With `counts` (batch samples per class) row j is further divided by
    1 + counts[j]: a class seen n times moves lr·n/(1+n) of the way to the
    mean of its samples, so centers cannot overshoot for lr <= 1.
    Returns False (centers untouched) when the weight is zero.
    """
    if fusion_weight == 0:
        logger.debug("center weight is 0; skipping the center step")
        return False

    scale: float | np.ndarray = 1.0 / fusion_weight
    if counts is not None:
        counts = np.asarray(counts, dtype=np.float64)
        for name, tensor in centers.items():
            if counts.shape != tensor.shape[:1]:
                raise DimensionError(f"class counts for {name}", counts.shape, tensor.shape[:1])
        scale = scale / (1.0 + counts)[:, None]
    optimizer.step(centers, grad_scale=scale)
    return True
