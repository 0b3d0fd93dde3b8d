import pytest

from kinforest.data import Relationship
from kinforest.errors import ContractError, PreconditionError
from kinforest.run_config import RunConfig
from kinforest.training import CrossValidationResult, run_cross_validation, run_relationships


TINY = RunConfig(d_h=4, layers=2, h1=8, h2=4, parts=2, batch=8, epochs=2, lr=1e-3)


def _losses(result: CrossValidationResult):
    return [[epoch.loss for epoch in fold.epochs] for fold in result.folds]


class TestRunCrossValidation:

    @pytest.fixture(scope="class")
    def result(self, small_manifest):
        return run_cross_validation(small_manifest, TINY, Relationship.FS, seed=11)

    def test_one_result_per_fold(self, result):
        assert [fold.fold for fold in result.folds] == [1, 2, 3, 4, 5]
        assert all(fold.test_pairs == 4 and fold.train_pairs == 16 for fold in result.folds)
        assert all(len(fold.epochs) == 2 for fold in result.folds)
        assert result.relationship == "FS"

    def test_mean_is_the_average_of_the_folds(self, result):
        assert result.mean_accuracy == pytest.approx(sum(result.accuracies.values()) / 5)

    def test_same_seed_same_numbers(self, result, small_manifest):
        again = run_cross_validation(small_manifest, TINY, Relationship.FS, seed=11)
        assert again.accuracies == result.accuracies
        assert _losses(again) == _losses(result)

    def test_fold_order_does_not_change_any_fold(self, result, small_manifest):
        shuffled = run_cross_validation(small_manifest, TINY, Relationship.FS, seed=11, fold_order=[4, 2, 5, 1, 3])
        assert shuffled.accuracies == result.accuracies
        assert _losses(shuffled) == _losses(result)

    def test_worker_threads_reproduce_the_inline_run(self, result, small_manifest):
        threaded = run_cross_validation(small_manifest, TINY, Relationship.FS, seed=11, workers=3)
        assert _losses(threaded) == _losses(result)

    def test_ensemble_trains_every_member(self, small_manifest):
        member = TINY.with_overrides({"h1": 6})
        result = run_cross_validation(small_manifest, TINY, Relationship.MS, seed=0, ensemble=[member])
        assert all(len(fold.epochs) == 4 for fold in result.folds)
        assert all(0.0 <= fold.accuracy <= 1.0 for fold in result.folds)

    def test_protocol_without_folds_is_dealt_from_the_seed(self, small_manifest):
        unsplit = small_manifest.with_pairs([pair.model_copy(update={"fold": None}) for pair in small_manifest.pairs])
        result = run_cross_validation(unsplit, TINY, Relationship.FS, seed=2)
        assert [fold.fold for fold in result.folds] == [1, 2, 3, 4, 5]
        assert all(fold.test_pairs == 4 and fold.train_pairs == 16 for fold in result.folds)


class TestPreconditions:

    def test_needs_exactly_five_folds(self, small_manifest):
        four = small_manifest.with_pairs([p for p in small_manifest.pairs if p.fold != 5])
        with pytest.raises(ContractError, match="expected 5 folds"):
            run_cross_validation(four, TINY, Relationship.FS)

    def test_fold_order_must_be_a_permutation(self, small_manifest):
        with pytest.raises(ContractError, match="not a permutation"):
            run_cross_validation(small_manifest, TINY, Relationship.FS, fold_order=[1, 2, 3, 4, 4])

    def test_empty_result_has_no_mean(self):
        with pytest.raises(PreconditionError):
            CrossValidationResult(seed=0).mean_accuracy


class TestRunRelationships:

    def test_skips_relationships_without_pairs(self, small_manifest):
        fd_only = small_manifest.with_pairs(small_manifest.pairs_for(Relationship.FD))
        cfg = TINY.with_overrides({"epochs": 1})
        results = run_relationships(fd_only, cfg, list(Relationship), seed=0)
        assert [r.relationship for r in results] == ["FD"]
