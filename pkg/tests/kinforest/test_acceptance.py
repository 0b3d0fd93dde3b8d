"""End-to-end runs on generated data; each takes minutes, not seconds."""

from pathlib import Path

import numpy as np
import pytest

from kinforest.data import Relationship, generate_synthetic
from kinforest.run_config import parse_config
from kinforest.training import run_relationships


SYNTHETIC_CFG = Path(__file__).resolve().parents[2] / "configs" / "synthetic.cfg"


def _means(results):
    return [result.mean_accuracy for result in results]


@pytest.mark.timeout(600)
def test_generated_families_are_verified_on_held_out_folds():
    manifest = generate_synthetic(n_families=50, d_in=32, noise=0.1, seed=1)
    results = run_relationships(manifest, parse_config(SYNTHETIC_CFG), list(Relationship), seed=1)

    assert [result.relationship for result in results] == [r.value for r in Relationship]
    assert float(np.mean(_means(results))) >= 0.90
    for result in results:
        assert min(result.accuracies.values()) >= 0.85, (result.relationship, result.accuracies)


@pytest.mark.timeout(900)
def test_center_loss_does_not_degrade_accuracy():
    cfg = parse_config(SYNTHETIC_CFG)
    with_center, without_center = [], []
    for seed in (0, 1, 2):
        manifest = generate_synthetic(n_families=25, d_in=16, noise=0.1, seed=seed)
        with_center += _means(run_relationships(manifest, cfg.with_overrides({"omega0": 0.01, "alpha": 1.05}), list(Relationship), seed=seed))
        without_center += _means(run_relationships(manifest, cfg.with_overrides({"omega0": 0.0}), list(Relationship), seed=seed))

    assert float(np.mean(with_center)) >= float(np.mean(without_center)) - 0.02
