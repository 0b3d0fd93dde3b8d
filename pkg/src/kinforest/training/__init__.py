from kinforest.training.checkpoint import load_checkpoint, save_checkpoint
from kinforest.training.cross_validation import (
    CrossValidationResult, FoldJob, FoldResult, run_cross_validation, run_fold, run_relationships
)
from kinforest.training.fold_worker_pool import FoldWorkerPool, run_jobs
from kinforest.training.optimizers import SGD, Adam, center_step
from kinforest.training.reports import ReportWriter, build_summary, read_report, read_summary, write_summary
from kinforest.training.sweep import SweepRow, grid_points, run_sweep
from kinforest.training.trainer import (
    EpochReport, FoldRun, accuracy, compute_losses, evaluate_fold, evaluate_pairs, predict_scores, train_epoch
)


__all__ = [
    "Adam",
    "CrossValidationResult",
    "EpochReport",
    "FoldJob",
    "FoldResult",
    "FoldRun",
    "FoldWorkerPool",
    "ReportWriter",
    "SGD",
    "SweepRow",
    "accuracy",
    "build_summary",
    "center_step",
    "compute_losses",
    "evaluate_fold",
    "evaluate_pairs",
    "grid_points",
    "load_checkpoint",
    "predict_scores",
    "read_report",
    "read_summary",
    "run_cross_validation",
    "run_fold",
    "run_jobs",
    "run_relationships",
    "run_sweep",
    "save_checkpoint",
    "train_epoch",
    "write_summary",
]
