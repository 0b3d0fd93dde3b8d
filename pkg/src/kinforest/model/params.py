"""Named parameter tensors of the full model.

Names are stable and their insertion order is the checkpoint order:

    forest.proj                  (9, d_h, d_in)   only when d_in != d_h
    forest.layer{l}.{A..E}       (9, d_h, d_h)    l = 1..L
    head.W1 / head.b1            (h1, 4·L·d_h) / (h1,)
    head.W2 / head.b2            (h2, h1) / (h2,)
    head.W3 / head.b3            (1, h2) / (1,)
    family.part{j}.W / .b        (n_families, L·d_h/M) / (n_families,)   j = 1..M
    center.C                     (2, h2)

With shared forest parameters the leading graph axis is dropped.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Tuple

import numpy as np

from kinforest.autodiff import Tensor
from kinforest.data.patch_kind import GRAPH_COUNT
from kinforest.errors import CheckpointError
from kinforest.run_config import RunConfig


LAYER_MATRICES = ("A", "B", "C", "D", "E")
CENTER = "center.C"


def model_seed(seed: int, fold: int, member: int = 0) -> np.random.SeedSequence:
    """Seed sequence for a fresh initialization of one fold (and ensemble member)."""
    entropy = [seed, fold] if member == 0 else [seed, fold, member]
    return np.random.SeedSequence(entropy)


@dataclass
class ParameterSet:
    """Ordered mapping of parameter name to leaf tensor."""

    tensors: Dict[str, Tensor] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Tensor: return self.tensors[name]
    def __contains__(self, name: object) -> bool: return name in self.tensors
    def __iter__(self) -> Iterator[str]: return iter(self.tensors)
    def __len__(self) -> int: return len(self.tensors)

    def items(self): return self.tensors.items()
    def names(self) -> List[str]: return list(self.tensors)

    def add(self, name: str, value: np.ndarray) -> Tensor:
        self.tensors[name] = Tensor(value, requires_grad=True, name=name)
        return self.tensors[name]

    def get(self, name: str) -> Tensor | None: return self.tensors.get(name)

    def subset(self, include_center: bool = True) -> Dict[str, Tensor]:
        return {n: t for n, t in self.tensors.items() if include_center or n != CENTER}

    def zero_grad(self) -> None:
        for tensor in self.tensors.values():
            tensor.zero_grad()

    def shapes(self) -> List[Tuple[str, Tuple[int, ...]]]:
        return [(name, tensor.shape) for name, tensor in self.tensors.items()]

    def count(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {name: tensor.value.copy() for name, tensor in self.tensors.items()}

    def load(self, values: Mapping[str, np.ndarray]) -> None:
        """Overwrite values in place; names and shapes must match exactly."""
        if list(values) != self.names():
            raise CheckpointError(f"parameter names differ: expected {self.names()}, got {list(values)}")
        for name, value in values.items():
            target = self.tensors[name]
            if tuple(np.shape(value)) != target.shape:
                raise CheckpointError(f"parameter '{name}' has shape {np.shape(value)}, expected {target.shape}")
            target.value[...] = value


def _uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_parameters(cfg: RunConfig, d_in: int, n_families: int, rng: np.random.Generator) -> ParameterSet:
    """uniform(±1/√fan_in) for every tensor, drawn in checkpoint order."""
    params = ParameterSet()
    lead: Tuple[int, ...] = () if cfg.share_params else (GRAPH_COUNT,)
    d_h = cfg.d_h

    if d_in != d_h:
        params.add("forest.proj", _uniform(rng, lead + (d_h, d_in), d_in))
    for layer in range(1, cfg.layers + 1):
        for matrix in LAYER_MATRICES:
            params.add(f"forest.layer{layer}.{matrix}", _uniform(rng, lead + (d_h, d_h), d_h))

    combined = 4 * cfg.feature_dim
    params.add("head.W1", _uniform(rng, (cfg.h1, combined), combined))
    params.add("head.b1", _uniform(rng, (cfg.h1,), combined))
    params.add("head.W2", _uniform(rng, (cfg.h2, cfg.h1), cfg.h1))
    params.add("head.b2", _uniform(rng, (cfg.h2,), cfg.h1))
    params.add("head.W3", _uniform(rng, (1, cfg.h2), cfg.h2))
    params.add("head.b3", _uniform(rng, (1,), cfg.h2))

    if n_families > 0:
        part = cfg.feature_dim // cfg.parts
        for j in range(1, cfg.parts + 1):
            params.add(f"family.part{j}.W", _uniform(rng, (n_families, part), part))
            params.add(f"family.part{j}.b", _uniform(rng, (n_families,), part))

    params.add(CENTER, _uniform(rng, (2, cfg.h2), cfg.h2))
    return params
