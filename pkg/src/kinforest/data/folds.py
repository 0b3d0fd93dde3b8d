"""Deterministic k-fold assignment for protocols that ship without fold labels."""

import logging

from typing import Dict, List, Sequence

import numpy as np

from kinforest.data.manifest import DatasetManifest, PairSample
from kinforest.data.relationship import Relationship
from kinforest.errors import ManifestValidationError, PreconditionError


logger = logging.getLogger(__name__)


def make_folds(pairs: Sequence[PairSample], k: int = 5, seed: int = 0) -> List[int]:
    """Return a 1-based fold index for every pair, aligned with `pairs`.

    Within each relationship the kin pairs are shuffled and dealt round-robin,
    then the non-kin pairs are shuffled and dealt continuing from where the kin
    pairs stopped. Fold sizes therefore differ by at most one and every fold's
    kin/non-kin counts differ by at most one.
    """
    if k < 1:
        raise PreconditionError(f"k must be at least 1, got {k}")

    rng = np.random.default_rng(seed)
    assignment: List[int] = [0] * len(pairs)

    by_relationship: Dict[Relationship, List[int]] = {}
    for position, pair in enumerate(pairs):
        by_relationship.setdefault(pair.relationship, []).append(position)

    for relationship in Relationship:
        positions = by_relationship.get(relationship)
        if not positions:
            continue
        if k > len(positions):
            raise PreconditionError(f"cannot split {len(positions)} {relationship.value} pairs into {k} folds")

        kin = [p for p in positions if pairs[p].is_kin]
        non_kin = [p for p in positions if not pairs[p].is_kin]
        if len(kin) != len(non_kin):
            logger.warning("%s has %d kin vs %d non-kin pairs; folds will not be balanced",
                           relationship.value, len(kin), len(non_kin))

        pointer = 0
        for group in (kin, non_kin):
            for position in rng.permutation(np.asarray(group, dtype=np.intp)):
                assignment[int(position)] = pointer % k + 1
                pointer += 1

    return assignment


def assign_folds(pairs: Sequence[PairSample], k: int = 5, seed: int = 0) -> List[PairSample]:
    """Copies of `pairs` carrying the folds chosen by `make_folds`."""
    return [pair.with_fold(fold) for pair, fold in zip(pairs, make_folds(pairs, k=k, seed=seed))]


def fold_sizes(folds: Sequence[int], k: int = 5) -> List[int]:
    counts = np.bincount(np.asarray(folds, dtype=np.intp), minlength=k + 1)
    return [int(c) for c in counts[1:k + 1]]


def ensure_folds(manifest: DatasetManifest, k: int = 5, seed: int = 0) -> DatasetManifest:
    """Deal folds with `make_folds` when the protocol ships without fold labels.

    A protocol that carries folds is returned unchanged; one that labels only
    some of its pairs is rejected. Dealt folds may differ by one kin or non-kin
    pair, so the returned manifest is validated with that slack.
    """
    unlabeled = sum(1 for pair in manifest.pairs if pair.fold is None)
    if unlabeled == 0:
        return manifest
    if unlabeled != len(manifest.pairs):
        raise ManifestValidationError(f"{unlabeled} of {len(manifest.pairs)} pairs lack a fold label; label all pairs or none")

    logger.info("protocol has no fold labels; dealing %d pairs into %d folds with seed %d", unlabeled, k, seed)
    return DatasetManifest(
        embeddings=manifest.embeddings,
        pairs=assign_folds(manifest.pairs, k=k, seed=seed),
        d_in=manifest.d_in,
        fold_slack=1,
    ).ensure_valid()
