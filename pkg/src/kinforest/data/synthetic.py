"""Synthetic kin datasets with a known answer.

Every family draws a latent vector; each of its four members (father, mother,
son, daughter) gets, for every patch kind, `latent + e_(kind mod d_in) + noise`.
Kin pairs therefore agree up to noise, while non-kin pairs differ by two
independent latents.
"""

import logging

from typing import Dict, List

import numpy as np

from kinforest.data.manifest import DatasetManifest, PairSample
from kinforest.data.patch_kind import PatchKind
from kinforest.data.relationship import Relationship
from kinforest.errors import PreconditionError


logger = logging.getLogger(__name__)

ROLES = ("father", "mother", "son", "daughter")
SYNTHETIC_FOLDS = 5


def image_id(family: int, role: str) -> str:
    return f"f{family:03d}_{role}"


def patch_offsets(d_in: int) -> np.ndarray:
    """(9, d_in) matrix of unit vectors, row k = e_(k mod d_in)."""
    offsets = np.zeros((len(PatchKind), d_in))
    for kind in PatchKind:
        offsets[kind.position, kind.position % d_in] = 1.0
    return offsets


def generate_synthetic(n_families: int, d_in: int, noise: float, seed: int) -> DatasetManifest:
    """A validated manifest with `n_families` kin and non-kin pairs per relationship.

    Non-kin pairs match the parent of family f with the child of family
    (f + s) mod n for a per-relationship random shift s in [1, n). Each
    non-kin pair lands in the same fold as the kin pair of its parent's family,
    and families are dealt to the five folds round-robin after a shuffle.
    """
    if n_families < 2:
        raise PreconditionError(f"need at least 2 families, got {n_families}")
    if d_in < 1:
        raise PreconditionError(f"d_in must be positive, got {d_in}")
    if noise < 0:
        raise PreconditionError(f"noise must be non-negative, got {noise}")

    rng = np.random.default_rng(seed)
    offsets = patch_offsets(d_in)
    latents = rng.standard_normal((n_families, d_in))

    embeddings: Dict[str, Dict[PatchKind, np.ndarray]] = {}
    for family in range(n_families):
        for role in ROLES:
            vectors = latents[family] + offsets + noise * rng.standard_normal((len(PatchKind), d_in))
            embeddings[image_id(family, role)] = {kind: vectors[kind.position].copy() for kind in PatchKind}

    fold_of = np.empty(n_families, dtype=int)
    fold_of[rng.permutation(n_families)] = np.arange(n_families) % SYNTHETIC_FOLDS + 1

    pairs: List[PairSample] = []
    for relationship in Relationship:
        shift = int(rng.integers(1, n_families))
        for family in range(n_families):
            other = (family + shift) % n_families
            fold = int(fold_of[family])
            pairs.append(PairSample(
                relationship=relationship, fold=fold, y=1,
                parent_id=image_id(family, relationship.parent_role),
                child_id=image_id(family, relationship.child_role),
                z_parent=family, z_child=family,
            ))
            pairs.append(PairSample(
                relationship=relationship, fold=fold, y=0,
                parent_id=image_id(family, relationship.parent_role),
                child_id=image_id(other, relationship.child_role),
                z_parent=family, z_child=other,
            ))

    manifest = DatasetManifest(embeddings=embeddings, pairs=pairs, d_in=d_in).ensure_valid()
    logger.debug("generated %d families (d_in=%d, noise=%g, seed=%d)", n_families, d_in, noise, seed)
    return manifest
