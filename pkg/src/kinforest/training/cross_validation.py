"""Five-fold protocol: every fold trains from a fresh initialization and is
scored on its held-out pairs."""

import logging

from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from pydantic import BaseModel, Field

from kinforest.data.folds import ensure_folds
from kinforest.data.manifest import DatasetManifest
from kinforest.data.relationship import Relationship
from kinforest.errors import ContractError, PreconditionError
from kinforest.model.fnn_model import FnnModel
from kinforest.run_config import RunConfig
from kinforest.training.fold_worker_pool import run_jobs
from kinforest.training.trainer import EpochReport, FoldRun, evaluate_pairs


logger = logging.getLogger(__name__)

FOLD_COUNT = 5


class FoldResult(BaseModel):
    relationship : str | None         = Field(default=None, description="Relationship code, None for mixed pairs")
    fold         : int                = Field(..., ge=1, description="Held-out fold")
    accuracy     : float              = Field(..., ge=0.0, le=1.0, description="Test accuracy on the held-out fold")
    test_pairs   : int                = Field(..., ge=1, description="Number of held-out pairs")
    train_pairs  : int                = Field(..., ge=1, description="Number of training pairs")
    epochs       : List[EpochReport]  = Field(default_factory=list, description="Epoch reports of every ensemble member, in order")


class CrossValidationResult(BaseModel):
    relationship : str | None         = Field(default=None, description="Relationship code, None for mixed pairs")
    seed         : int                = Field(..., description="Run seed")
    folds        : List[FoldResult]   = Field(default_factory=list, description="Per-fold results, ordered by fold")

    @property
    def accuracies(self) -> Dict[int, float]:
        return {result.fold: result.accuracy for result in self.folds}

    @property
    def mean_accuracy(self) -> float:
        if not self.folds:
            raise PreconditionError("no fold results to average")
        return float(np.mean([result.accuracy for result in self.folds]))


@dataclass
class FoldJob:
    """Everything one worker needs to train and score a single fold."""

    manifest: DatasetManifest
    members: List[RunConfig]
    fold: int
    relationship: Relationship | None
    seed: int
    models: List[FnnModel] = field(default_factory=list)

    def __call__(self) -> FoldResult:
        return run_fold(self)


def run_fold(job: FoldJob) -> FoldResult:
    """Train every ensemble member on the other folds, then score the held-out one
    with the mean of the members' σ(logit)."""
    folds = job.manifest.folds(job.relationship)
    train_pairs = job.manifest.pairs_for(job.relationship, folds=[f for f in folds if f != job.fold])
    test_pairs = job.manifest.pairs_for(job.relationship, folds=[job.fold])
    if not test_pairs:
        raise PreconditionError(f"fold {job.fold} has no test pairs")

    epochs: List[EpochReport] = []
    job.models = []
    for member, cfg in enumerate(job.members):
        run = FoldRun.start(job.manifest, cfg, train_pairs, job.seed, job.fold, job.relationship, member=member)
        epochs.extend(run.fit())
        job.models.append(run.model)

    accuracy = evaluate_pairs(job.models, job.manifest, test_pairs)
    label = job.relationship.value if job.relationship else "all"
    logger.info("%s fold %d: accuracy=%.4f (%d test pairs, %d members)", label, job.fold, accuracy, len(test_pairs), len(job.members))
    return FoldResult(
        relationship=job.relationship.value if job.relationship else None,
        fold=job.fold,
        accuracy=accuracy,
        test_pairs=len(test_pairs),
        train_pairs=len(train_pairs),
        epochs=epochs,
    )


def run_cross_validation(
    manifest: DatasetManifest,
    cfg: RunConfig,
    relationship: Relationship | None = None,
    seed: int = 0,
    ensemble: Sequence[RunConfig] = (),
    workers: int = 1,
    timeout_seconds: float = 3600,
    fold_order: Sequence[int] | None = None,
) -> CrossValidationResult:
    """Run the five-fold protocol for one relationship (or all pairs when None).

    `ensemble` adds member configurations trained alongside `cfg` on each fold.
    `fold_order` only changes the order jobs are submitted in; results are
    always reported by fold.
    """
    manifest = ensure_folds(manifest, seed=seed)
    folds = manifest.folds(relationship)
    if len(folds) != FOLD_COUNT:
        raise ContractError(f"expected {FOLD_COUNT} folds, found {len(folds)}: {folds}")

    label = relationship.value if relationship else "all"
    logger.info("cross-validating %s with seed %d, config %s", label, seed, cfg.config_hash()[:12])
    for key, decision in cfg.decision_log().items():
        logger.info("decision %s: %s", key, decision)

    members = [cfg, *ensemble]
    order = list(fold_order) if fold_order is not None else folds
    if sorted(order) != folds:
        raise ContractError(f"fold order {order} is not a permutation of {folds}")

    jobs = [FoldJob(manifest, members, fold, relationship, seed) for fold in order]
    results = run_jobs(lambda job: job(), jobs, worker_count=workers, timeout_seconds=timeout_seconds)
    return CrossValidationResult(
        relationship=relationship.value if relationship else None,
        seed=seed,
        folds=sorted(results, key=lambda result: result.fold),
    )


def run_relationships(
    manifest: DatasetManifest,
    cfg: RunConfig,
    relationships: Sequence[Relationship],
    seed: int = 0,
    ensemble: Sequence[RunConfig] = (),
    workers: int = 1,
    timeout_seconds: float = 3600,
) -> List[CrossValidationResult]:
    """Cross-validate each relationship present in the manifest, in enum order."""
    present = set(manifest.relationships())
    return [
        run_cross_validation(manifest, cfg, relationship, seed, ensemble, workers, timeout_seconds)
        for relationship in relationships
        if relationship in present
    ]
