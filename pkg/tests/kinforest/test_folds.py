from typing import List

import numpy as np
import pytest

from kinforest.data import (
    PairSample, Relationship, assign_folds, ensure_folds, fold_sizes, make_folds, manifest_from_arrays
)
from kinforest.errors import ManifestValidationError, PreconditionError, UnbalancedFoldError


def protocol(count: int, relationship: Relationship = Relationship.FS) -> List[PairSample]:
    """`count` pairs, the first ceil(count/2) kin, the rest non-kin."""
    kin = (count + 1) // 2
    return [
        PairSample(
            relationship=relationship, parent_id=f"p{i}", child_id=f"c{i}",
            y=1 if i < kin else 0, z_parent=i, z_child=i if i < kin else i + count,
        )
        for i in range(count)
    ]


def describe_make_folds():

    @pytest.mark.parametrize("count, sizes", [
        (250, [50, 50, 50, 50, 50]),
        (156, [32, 31, 31, 31, 31]),
        (134, [27, 27, 27, 27, 26]),
        (116, [24, 23, 23, 23, 23]),
        (127, [26, 26, 25, 25, 25]),
        (5,   [1, 1, 1, 1, 1]),
    ])
    def it_deals_pairs_into_near_equal_folds(count, sizes):
        assert fold_sizes(make_folds(protocol(count), k=5, seed=0)) == sizes

    def it_keeps_kin_and_non_kin_within_one_per_fold():
        pairs = protocol(156)
        folds = np.array(make_folds(pairs, seed=4))
        labels = np.array([p.y for p in pairs])
        for fold in range(1, 6):
            kin = int(np.sum(labels[folds == fold] == 1))
            non_kin = int(np.sum(labels[folds == fold] == 0))
            assert abs(kin - non_kin) <= 1

    def it_balances_even_splits_exactly():
        pairs = assign_folds(protocol(250), seed=9)
        for fold in range(1, 6):
            in_fold = [p for p in pairs if p.fold == fold]
            assert sum(p.y for p in in_fold) == 25

    def it_is_deterministic_per_seed():
        pairs = protocol(134)
        assert make_folds(pairs, seed=1) == make_folds(pairs, seed=1)
        assert make_folds(pairs, seed=1) != make_folds(pairs, seed=2)

    def it_splits_each_relationship_separately():
        pairs = protocol(10, Relationship.FS) + protocol(10, Relationship.MD)
        folds = make_folds(pairs)
        assert fold_sizes(folds[:10]) == [2, 2, 2, 2, 2]
        assert fold_sizes(folds[10:]) == [2, 2, 2, 2, 2]

    def context_with_fewer_pairs_than_folds():

        def it_raises_a_precondition_error():
            with pytest.raises(PreconditionError, match="cannot split 4 FS pairs"):
                make_folds(protocol(4), k=5)


def unlabeled_manifest(count: int):
    pairs = protocol(count)
    images = {name: np.zeros((9, 2)) for pair in pairs for name in (pair.parent_id, pair.child_id)}
    return manifest_from_arrays(images, pairs)


def describe_ensure_folds():

    def it_deals_folds_when_the_protocol_has_none():
        manifest = ensure_folds(unlabeled_manifest(156), seed=0)
        assert manifest.folds() == [1, 2, 3, 4, 5]
        assert fold_sizes([p.fold for p in manifest.pairs]) == [32, 31, 31, 31, 31]

    def it_accepts_odd_folds_that_differ_by_one():
        manifest = ensure_folds(unlabeled_manifest(156), seed=3)
        assert manifest.fold_slack == 1
        for fold in manifest.folds():
            labels = [p.y for p in manifest.pairs_for(folds=[fold])]
            assert abs(2 * sum(labels) - len(labels)) <= 1

    def it_matches_make_folds_for_the_same_seed():
        manifest = unlabeled_manifest(134)
        dealt = ensure_folds(manifest, seed=7)
        assert [p.fold for p in dealt.pairs] == make_folds(manifest.pairs, seed=7)

    def it_leaves_labeled_protocols_alone(small_manifest):
        assert ensure_folds(small_manifest, seed=5) is small_manifest

    def it_leaves_an_empty_protocol_alone():
        manifest = manifest_from_arrays({"a": np.zeros((9, 2))})
        assert ensure_folds(manifest) is manifest

    def context_with_some_pairs_labeled():

        def it_raises_a_manifest_validation_error():
            pairs = protocol(10)
            pairs[0], pairs[9] = pairs[0].with_fold(1), pairs[9].with_fold(1)
            images = {name: np.zeros((9, 2)) for pair in pairs for name in (pair.parent_id, pair.child_id)}
            with pytest.raises(ManifestValidationError, match="8 of 10 pairs"):
                ensure_folds(manifest_from_arrays(images, pairs))

    def context_with_a_pre_split_protocol():

        def it_still_rejects_any_kin_imbalance():
            pairs = [pair.with_fold(1) for pair in protocol(3)]
            images = {name: np.zeros((9, 2)) for pair in pairs for name in (pair.parent_id, pair.child_id)}
            with pytest.raises(UnbalancedFoldError):
                manifest_from_arrays(images, pairs)
