"""One fold's training loop and its evaluation."""

import logging

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from pydantic import BaseModel, Field
from scipy import special

from kinforest.autodiff import Tensor, backward, graph_scope, ops
from kinforest.data.forest_input import ForestBatch, build_batch
from kinforest.data.manifest import DatasetManifest, PairSample
from kinforest.data.relationship import Relationship
from kinforest.errors import NonFiniteLossError, PreconditionError
from kinforest.losses import (
    FusionConfig, center_loss, component_values, cross_generation_loss, direction_loss, family_id_loss,
    fuse_losses, kin_bce_loss, triplet_loss
)
from kinforest.model.fnn_model import FnnModel
from kinforest.model.params import CENTER
from kinforest.run_config import RunConfig
from kinforest.training.optimizers import SGD, Adam, center_step


logger = logging.getLogger(__name__)

THRESHOLD = 0.5


class EpochReport(BaseModel):
    relationship  : str | None        = Field(default=None, description="Relationship code, None when pairs are mixed")
    fold          : int | None        = Field(default=None, description="Held-out fold of this run")
    epoch         : int               = Field(..., ge=0, description="Epoch counter t")
    loss          : float             = Field(..., description="Fused loss averaged over the epoch's batches")
    accuracy      : float             = Field(..., ge=0.0, le=1.0, description="Training accuracy with σ(logit) > 0.5")
    components    : Dict[str, float]  = Field(default_factory=dict, description="Per-term loss averaged over batches")
    center_weight : float             = Field(..., description="ω₀·αᵗ")
    lr            : float             = Field(..., description="Learning rate used this epoch")


def predictions(scores: np.ndarray) -> np.ndarray:
    return (np.asarray(scores) > THRESHOLD).astype(np.int64)


def accuracy(scores: np.ndarray, y: Sequence[int]) -> float:
    labels = np.asarray(y, dtype=np.int64)
    if labels.size == 0:
        raise PreconditionError("accuracy of an empty set")
    return float(np.mean(predictions(scores) == labels))


def family_index(pairs: Sequence[PairSample]) -> Dict[int, int]:
    """Map the family labels seen in `pairs` onto 0..K-1 (sorted)."""
    families = sorted({p.z_parent for p in pairs} | {p.z_child for p in pairs})
    return {family: position for position, family in enumerate(families)}


def compute_losses(model: FnnModel, batch: ForestBatch, fusion: FusionConfig, families: Dict[int, int]) -> Tuple[Tensor, Dict[str, Tensor], Tensor]:
    """Forward one batch and build every weighted term; returns (fused, terms, logit)."""
    need_family = fusion.weight("family") != 0
    out = model.forward(batch.x_parent, batch.x_child, with_family=need_family)
    y = batch.y
    terms: Dict[str, Tensor] = {}

    if fusion.weight("bce") != 0:
        terms["bce"] = kin_bce_loss(out.logit, y)
    if fusion.weight("cross_pos") != 0:
        terms["cross_pos"] = cross_generation_loss(out.F_parent, out.F_child, y, fusion.omega_pos, 0.0)
    if fusion.weight("cross_neg") != 0:
        terms["cross_neg"] = cross_generation_loss(out.F_parent, out.F_child, y, 0.0, fusion.omega_neg)
    if fusion.weight("direction") != 0:
        terms["direction"] = direction_loss(out.F_parent, out.F_child, y)
    if fusion.weight("triplet") != 0:
        features = ops.concat([out.F_parent, out.F_child], axis=0)
        targets = np.concatenate([batch.z_parent, batch.z_child])
        terms["triplet"] = triplet_loss(features, targets, fusion.margin)
    if need_family and out.family_parent:
        labels = np.array([families[int(z)] for z in np.concatenate([batch.z_parent, batch.z_child])])
        part_logits = [ops.concat([p, c], axis=0) for p, c in zip(out.family_parent, out.family_child)]
        terms["family"] = ops.mul(family_id_loss(part_logits, labels), float(len(part_logits)))
    if fusion.weight("center") != 0:
        terms["center"] = center_loss(out.H, y, model.centers)

    return fuse_losses(terms, fusion), terms, out.logit


@dataclass
class FoldRun:
    """Mutable state of one fold's training: model, optimizers and batch RNG."""

    model: FnnModel
    cfg: RunConfig
    manifest: DatasetManifest
    train_pairs: List[PairSample]
    families: Dict[int, int]
    optimizer: Adam
    center_optimizer: SGD
    rng: np.random.Generator
    fold: int | None = None
    relationship: Relationship | None = None
    freeze_model: bool = False
    freeze_centers: bool = False
    reports: List[EpochReport] = field(default_factory=list)

    @classmethod
    def start(
        cls,
        manifest: DatasetManifest,
        cfg: RunConfig,
        train_pairs: Sequence[PairSample],
        seed: int,
        fold: int | None = None,
        relationship: Relationship | None = None,
        member: int = 0,
    ) -> "FoldRun":
        """Fresh initialization seeded by (seed, fold[, member])."""
        if not train_pairs:
            raise PreconditionError(f"fold {fold} has no training pairs")
        families = family_index(train_pairs)
        fold_key = fold if fold is not None else 0
        model = FnnModel.initialize(cfg, manifest.d_in, len(families), seed, fold_key, member)
        if cfg.omega0 == 0:
            logger.warning("omega0 is 0: center loss disabled and centers stay frozen")
        return cls(
            model=model,
            cfg=cfg,
            manifest=manifest,
            train_pairs=list(train_pairs),
            families=families,
            optimizer=Adam(lr=cfg.lr),
            center_optimizer=SGD(lr=cfg.center_lr),
            rng=np.random.default_rng(np.random.SeedSequence([seed, fold_key, member, 1])),
            fold=fold,
            relationship=relationship,
        )

    def batches(self) -> List[List[PairSample]]:
        order = self.rng.permutation(len(self.train_pairs))
        size = self.cfg.batch
        return [[self.train_pairs[i] for i in order[start:start + size]] for start in range(0, len(order), size)]

    def fit(self) -> List[EpochReport]:
        for t in range(self.cfg.epochs):
            train_epoch(self, t)
        return self.reports


def train_epoch(run: FoldRun, t: int) -> EpochReport:
    """One pass over the training pairs in shuffled batches (last short batch kept)."""
    cfg = run.cfg
    fusion = FusionConfig.from_run_config(cfg, t)
    lr = cfg.learning_rate(t)
    main_params = run.model.params.subset(include_center=False)
    center_params = {CENTER: run.model.centers}

    losses: List[float] = []
    components: Dict[str, List[float]] = {}
    correct = 0
    seen = 0

    for batch_pairs in run.batches():
        batch = build_batch(batch_pairs, run.manifest)
        run.model.params.zero_grad()

        with graph_scope():
            fused, terms, logit = compute_losses(run.model, batch, fusion, run.families)
            if not np.isfinite(fused.item()):
                raise NonFiniteLossError(component_values(terms))
            backward(fused)

        if not run.freeze_model:
            run.optimizer.step(main_params, lr=lr)
        if not run.freeze_centers:
            counts = np.bincount(batch.y.astype(np.intp), minlength=run.model.centers.shape[0])
            center_step(center_params, fusion.center_weight, run.center_optimizer, counts=counts)

        losses.append(fused.item())
        for name, value in component_values(terms).items():
            components.setdefault(name, []).append(value)
        correct += int(np.sum(predictions(special.expit(logit.value)) == batch.y.astype(np.int64)))
        seen += batch.size

    report = EpochReport(
        relationship=run.relationship.value if run.relationship else None,
        fold=run.fold,
        epoch=t,
        loss=float(np.mean(losses)),
        accuracy=correct / seen,
        components={name: float(np.mean(values)) for name, values in components.items()},
        center_weight=fusion.center_weight,
        lr=lr,
    )
    run.reports.append(report)
    logger.info(
        "%s fold %s epoch %d: loss=%.6f acc=%.4f center_weight=%.6f",
        report.relationship or "all", run.fold, t, report.loss, report.accuracy, report.center_weight,
    )
    return report


def predict_scores(models: Sequence[FnnModel], manifest: DatasetManifest, pairs: Sequence[PairSample], batch_size: int = 256) -> np.ndarray:
    """σ(logit) per pair, averaged over the given models."""
    if not pairs:
        raise PreconditionError("no pairs to score")
    scores = np.zeros(len(pairs))
    for start in range(0, len(pairs), batch_size):
        batch = build_batch(pairs[start:start + batch_size], manifest)
        member_scores = [model.scores(batch.x_parent, batch.x_child) for model in models]
        scores[start:start + batch.size] = np.mean(member_scores, axis=0)
    return scores


def evaluate_pairs(models: Sequence[FnnModel] | FnnModel, manifest: DatasetManifest, pairs: Sequence[PairSample]) -> float:
    if isinstance(models, FnnModel):
        models = [models]
    if not pairs:
        raise PreconditionError("empty test fold")
    return accuracy(predict_scores(models, manifest, pairs), [p.y for p in pairs])


def evaluate_fold(model: FnnModel | Sequence[FnnModel], manifest: DatasetManifest, fold: int, relationship: Relationship | None = None) -> float:
    """Fraction of the fold's pairs where (σ(logit) > 0.5) equals the kin label."""
    pairs = manifest.pairs_for(relationship, folds=[fold])
    if not pairs:
        raise PreconditionError(f"fold {fold} has no test pairs")
    return evaluate_pairs(model, manifest, pairs)
