from dataclasses import dataclass
from typing import Sequence

import numpy as np

from kinforest.data.manifest import DatasetManifest, PairSample
from kinforest.data.patch_kind import GRAPH_COUNT, PatchKind
from kinforest.errors import MissingPatchKindError, PreconditionError, UnknownImageError


@dataclass(frozen=True)
class ForestInput:
    """Node features of the nine paired graphs of one parent/child pair.

    Row g of `x_parent` / `x_child` is the embedding of patch kind g (enum order).
    """

    parent_id: str
    child_id: str
    x_parent: np.ndarray  # (9, d_in)
    x_child: np.ndarray   # (9, d_in)

    @property
    def graph_count(self) -> int: return self.x_parent.shape[0]


@dataclass(frozen=True)
class ForestBatch:
    """N forests stacked graph-major, ready for the batched forward pass."""

    x_parent: np.ndarray  # (9, N, d_in)
    x_child: np.ndarray   # (9, N, d_in)
    y: np.ndarray         # (N,) float
    z_parent: np.ndarray  # (N,) int
    z_child: np.ndarray   # (N,) int

    @property
    def size(self) -> int: return int(self.y.shape[0])

    @classmethod
    def from_forests(cls, forests: Sequence[ForestInput], y: Sequence[int], z_parent: Sequence[int], z_child: Sequence[int]) -> "ForestBatch":
        return cls(
            x_parent=np.stack([f.x_parent for f in forests], axis=1),
            x_child=np.stack([f.x_child for f in forests], axis=1),
            y=np.asarray(y, dtype=np.float64),
            z_parent=np.asarray(z_parent, dtype=np.intp),
            z_child=np.asarray(z_child, dtype=np.intp),
        )


def _require_complete(image_id: str, manifest: DatasetManifest) -> None:
    if not manifest.has_image(image_id):
        raise UnknownImageError(image_id)
    patches = manifest.patches(image_id)
    missing = [kind.value for kind in PatchKind if kind not in patches]
    if missing:
        raise MissingPatchKindError(image_id, missing)


def build_forest(parent_id: str, child_id: str, manifest: DatasetManifest) -> ForestInput:
    """Pair up the parent's and child's patch embeddings, one graph per patch kind."""
    _require_complete(parent_id, manifest)
    _require_complete(child_id, manifest)
    forest = ForestInput(
        parent_id=parent_id,
        child_id=child_id,
        x_parent=manifest.stacked(parent_id),
        x_child=manifest.stacked(child_id),
    )
    assert forest.graph_count == GRAPH_COUNT
    return forest


def build_batch(pairs: Sequence[PairSample], manifest: DatasetManifest) -> ForestBatch:
    if not pairs:
        raise PreconditionError("cannot build an empty batch")
    forests = [build_forest(p.parent_id, p.child_id, manifest) for p in pairs]
    return ForestBatch.from_forests(
        forests,
        y=[p.y for p in pairs],
        z_parent=[p.z_parent for p in pairs],
        z_child=[p.z_child for p in pairs],
    )
