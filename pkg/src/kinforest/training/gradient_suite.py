"""Finite-difference check of the full model: every parameter, one batch,
all seven loss terms switched on."""

import logging

from dataclasses import dataclass
from typing import List, Sequence

from kinforest.autodiff import GradientCheckReport, gradient_check
from kinforest.data.forest_input import build_batch
from kinforest.data.relationship import Relationship
from kinforest.data.synthetic import generate_synthetic
from kinforest.losses import FusionConfig
from kinforest.model.fnn_model import FnnModel
from kinforest.run_config import RunConfig
from kinforest.training.trainer import compute_losses, family_index


logger = logging.getLogger(__name__)

TOLERANCE = 1e-4
SUITE_SEEDS = (0, 1, 2)
SUITE_EPOCH = 3

SUITE_CONFIG = RunConfig(d_h=4, layers=4, h1=8, h2=4, parts=4, batch=4)
SUITE_D_IN = 6


@dataclass(frozen=True)
class SuiteResult:
    seed: int
    report: GradientCheckReport

    @property
    def passed(self) -> bool: return self.report.passed(TOLERANCE)


def check_model_gradients(
    seed: int,
    cfg: RunConfig = SUITE_CONFIG,
    d_in: int = SUITE_D_IN,
    eps: float = 1e-5,
    coords_per_param: int | None = 8,
    atol: float = 1e-9,
) -> SuiteResult:
    """Check the fused loss of one four-pair batch drawn from two synthetic families.

    The batch holds two kin and two non-kin F-S pairs so that every term,
    triplets included, contributes a gradient.
    """
    manifest = generate_synthetic(n_families=2, d_in=d_in, noise=0.1, seed=seed)
    pairs = manifest.pairs_for(Relationship.FS)[: cfg.batch]
    batch = build_batch(pairs, manifest)
    families = family_index(pairs)

    model = FnnModel.initialize(cfg, d_in, len(families), seed)
    fusion = FusionConfig.from_run_config(cfg, SUITE_EPOCH)

    report = gradient_check(
        lambda params: compute_losses(model, batch, fusion, families)[0],
        model.params.tensors,
        eps=eps,
        coords_per_param=coords_per_param,
        seed=seed,
        atol=atol,
    )
    logger.info(
        "gradient suite seed %d: max relative error %.3e at %s%s over %d coordinates",
        seed, report.max_relative_error, report.worst_parameter, report.worst_index or "", report.checked,
    )
    return SuiteResult(seed=seed, report=report)


def run_gradient_suite(seeds: Sequence[int] = SUITE_SEEDS, eps: float = 1e-5, coords_per_param: int | None = 8) -> List[SuiteResult]:
    return [check_model_gradients(seed, eps=eps, coords_per_param=coords_per_param) for seed in seeds]
