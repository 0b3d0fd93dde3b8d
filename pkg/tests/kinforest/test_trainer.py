import numpy as np
import pytest

from kinforest.autodiff import graph_scope
from kinforest.data import Relationship, build_batch, generate_synthetic
from kinforest.errors import PreconditionError
from kinforest.losses import FusionConfig
from kinforest.model import FnnModel
from kinforest.run_config import RunConfig
from kinforest.training import FoldRun, accuracy, compute_losses, evaluate_fold, evaluate_pairs, predict_scores
from kinforest.training.trainer import family_index, train_epoch


BCE_ONLY = dict(omega0=0.0, omega2=0.0, omega3=0.0, omega4=0.0, omega5=0.0, omega6=0.0)
CENTER_ONLY = dict(omega1=0.0, omega2=0.0, omega3=0.0, omega4=0.0, omega5=0.0, omega6=0.0)


def _train_pairs(manifest, relationship=Relationship.FS, held_out=1):
    return manifest.pairs_for(relationship, folds=[f for f in manifest.folds(relationship) if f != held_out])


class TestComputeLosses:

    def test_every_weighted_term_is_built(self, small_manifest, tiny_cfg):
        pairs = _train_pairs(small_manifest)
        families = family_index(pairs)
        model = FnnModel.initialize(tiny_cfg, small_manifest.d_in, len(families), seed=0)
        with graph_scope():
            fused, terms, logit = compute_losses(model, build_batch(pairs[:8], small_manifest), FusionConfig.from_run_config(tiny_cfg), families)
        assert set(terms) == {"bce", "cross_pos", "cross_neg", "direction", "triplet", "family", "center"}
        assert logit.shape == (8,)
        assert np.isfinite(fused.item())

    def test_zero_weights_are_not_computed(self, small_manifest, tiny_cfg):
        cfg = tiny_cfg.with_overrides(BCE_ONLY)
        pairs = _train_pairs(small_manifest)
        model = FnnModel.initialize(cfg, small_manifest.d_in, 0, seed=0)
        with graph_scope():
            fused, terms, _ = compute_losses(model, build_batch(pairs[:4], small_manifest), FusionConfig.from_run_config(cfg), {})
        assert list(terms) == ["bce"]
        assert fused.item() == terms["bce"].item()

    def test_duplicated_batch_equals_the_single_pair(self, small_manifest, tiny_cfg):
        cfg = tiny_cfg.with_overrides({"omega0": 0.0})
        pairs = _train_pairs(small_manifest)
        kin = next(p for p in pairs if p.is_kin)
        families = family_index(pairs)
        model = FnnModel.initialize(cfg, small_manifest.d_in, len(families), seed=5)
        fusion = FusionConfig.from_run_config(cfg)

        with graph_scope():
            single, _, _ = compute_losses(model, build_batch([kin], small_manifest), fusion, families)
            double, _, _ = compute_losses(model, build_batch([kin, kin], small_manifest), fusion, families)
        assert double.item() == pytest.approx(single.item(), rel=0, abs=1e-12)


class TestFoldRun:

    def test_bce_alone_generalizes_to_the_held_out_fold(self):
        manifest = generate_synthetic(n_families=20, d_in=8, noise=0.05, seed=3)
        cfg = RunConfig(layers=2, d_h=8, h1=16, h2=8, parts=4, lr=1e-2, batch=16, epochs=60, **BCE_ONLY)
        pairs = _train_pairs(manifest)

        run = FoldRun.start(manifest, cfg, pairs, seed=0, fold=1, relationship=Relationship.FS)
        reports = run.fit()

        assert len(reports) == 60
        assert reports[-1].loss < reports[0].loss
        assert evaluate_pairs(run.model, manifest, pairs) >= 0.9
        assert evaluate_fold(run.model, manifest, 1, Relationship.FS) >= 0.75

    def test_frozen_run_scales_the_loss_by_alpha(self, small_manifest, tiny_cfg):
        cfg = tiny_cfg.with_overrides({**CENTER_ONLY, "batch": 64, "epochs": 4})
        run = FoldRun.start(small_manifest, cfg, _train_pairs(small_manifest), seed=2, fold=1)
        run.freeze_model = True
        run.freeze_centers = True
        reports = run.fit()

        for earlier, later in zip(reports, reports[1:]):
            assert later.loss / earlier.loss == pytest.approx(1.05, rel=1e-9)

    def test_reports_follow_the_schedules(self, small_manifest, tiny_cfg):
        cfg = tiny_cfg.with_overrides({"epochs": 3, "decay_interval": 2})
        reports = FoldRun.start(small_manifest, cfg, _train_pairs(small_manifest), seed=0, fold=1).fit()
        assert [r.epoch for r in reports] == [0, 1, 2]
        assert [r.center_weight for r in reports] == [cfg.center_weight(t) for t in range(3)]
        assert [r.lr for r in reports] == [1e-3, 1e-3, 5e-4]
        assert all(0.0 <= r.accuracy <= 1.0 for r in reports)
        assert "center" in reports[0].components

    def test_single_epoch_updates_the_model(self, small_manifest, tiny_cfg):
        run = FoldRun.start(small_manifest, tiny_cfg, _train_pairs(small_manifest), seed=1, fold=1)
        before = run.model.params["head.W1"].value.copy()

        report = train_epoch(run, 5)

        assert run.reports == [report]
        assert report.epoch == 5
        assert report.center_weight == tiny_cfg.center_weight(5)
        assert report.lr == tiny_cfg.learning_rate(5)
        assert not np.array_equal(run.model.params["head.W1"].value, before)

    def test_same_seed_same_run(self, small_manifest, tiny_cfg):
        pairs = _train_pairs(small_manifest)
        first = FoldRun.start(small_manifest, tiny_cfg, pairs, seed=4, fold=2).fit()
        again = FoldRun.start(small_manifest, tiny_cfg, pairs, seed=4, fold=2).fit()
        assert [r.loss for r in first] == [r.loss for r in again]

    def test_no_training_pairs(self, small_manifest, tiny_cfg):
        with pytest.raises(PreconditionError, match="no training pairs"):
            FoldRun.start(small_manifest, tiny_cfg, [], seed=0, fold=1)

    def test_last_short_batch_is_kept(self, small_manifest, tiny_cfg):
        pairs = _train_pairs(small_manifest)
        run = FoldRun.start(small_manifest, tiny_cfg.with_overrides({"batch": 5}), pairs, seed=0, fold=1)
        assert [len(batch) for batch in run.batches()] == [5, 5, 5, 1]


class TestEvaluation:

    def test_constant_zero_model_scores_half(self, small_manifest, tiny_cfg):
        model = FnnModel.initialize(tiny_cfg, small_manifest.d_in, 0, seed=0)
        for name in ("head.W3", "head.b3"):
            model.params[name].value[...] = 0.0

        scores = predict_scores([model], small_manifest, small_manifest.pairs_for(Relationship.MD, folds=[3]))
        assert np.all(scores == 0.5)
        assert evaluate_fold(model, small_manifest, fold=3, relationship=Relationship.MD) == 0.5

    def test_ensemble_averages_member_scores(self, small_manifest, tiny_cfg):
        pairs = small_manifest.pairs_for(Relationship.FD, folds=[2])
        members = [FnnModel.initialize(tiny_cfg, small_manifest.d_in, 0, seed=0, member=m) for m in range(3)]
        expected = np.mean([predict_scores([m], small_manifest, pairs) for m in members], axis=0)
        assert np.allclose(predict_scores(members, small_manifest, pairs), expected, rtol=0, atol=1e-15)

    def test_empty_fold(self, small_manifest, tiny_cfg):
        model = FnnModel.initialize(tiny_cfg, small_manifest.d_in, 0, seed=0)
        with pytest.raises(PreconditionError, match="fold 9 has no test pairs"):
            evaluate_fold(model, small_manifest, fold=9)

    def test_accuracy_threshold_is_strict(self):
        assert accuracy(np.array([0.5, 0.51, 0.49]), [0, 1, 0]) == 1.0
        with pytest.raises(PreconditionError):
            accuracy(np.array([]), [])
