"""Run artifacts: epoch reports as JSON Lines and the cross-validation summary.

A report file holds one JSON object per line, tagged by `record`:

    {"record": "header",  "config": {...}, "config_hash": "...", "seed": 1, "decisions": {...}}
    {"record": "epoch",   "relationship": "FS", "fold": 1, "epoch": 0, "loss": ..., ...}
    {"record": "summary", "means": {...}, ...}

Keys are sorted so identical runs give byte-identical files.
"""

import json

from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any, Dict, Iterable, List, Sequence

import numpy as np

from kinforest.data.relationship import Relationship
from kinforest.run_config import RunConfig
from kinforest.training.cross_validation import CrossValidationResult
from kinforest.training.trainer import EpochReport


def _dumps(record: Dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, allow_nan=False)


@dataclass
class ReportWriter:
    """Appends tagged records to a JSON Lines file."""

    path: Path
    _handle: IO[str] | None = field(default=None, repr=False)

    def __enter__(self) -> "ReportWriter":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = self.path.open("w", encoding="utf-8", newline="\n")
        return self

    def __exit__(self, *exc: Any) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def write(self, kind: str, payload: Dict[str, Any]) -> None:
        if self._handle is None:
            raise RuntimeError(f"report {self.path} is not open")
        self._handle.write(_dumps({"record": kind, **payload}) + "\n")

    def header(self, cfg: RunConfig, seed: int, **extra: Any) -> None:
        self.write("header", {
            "config": cfg.model_dump(),
            "config_hash": cfg.config_hash(),
            "seed": seed,
            "decisions": cfg.decision_log(),
            **extra,
        })

    def epochs(self, reports: Iterable[EpochReport]) -> None:
        for report in reports:
            self.write("epoch", report.model_dump())

    def summary(self, summary: Dict[str, Any]) -> None:
        self.write("summary", summary)


def read_report(path: Path | str) -> List[Dict[str, Any]]:
    with Path(path).open(encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def epoch_records(results: Sequence[CrossValidationResult]) -> List[EpochReport]:
    return [report for result in results for fold in result.folds for report in fold.epochs]


# ===========================================================================================
# Summary
# ===========================================================================================

def build_summary(
    results: Sequence[CrossValidationResult],
    cfg: RunConfig,
    seed: int,
    ensemble: Sequence[RunConfig] = (),
) -> Dict[str, Any]:
    """Per-relationship per-fold accuracy, relationship means and their overall mean.

    Relationships are listed in F-S, F-D, M-S, M-D order; "overall" is the mean
    of the relationship means and is null when there are none.
    """
    order = {r.value: position for position, r in enumerate(Relationship)}
    ranked = sorted(results, key=lambda r: order.get(r.relationship or "", len(order)))

    accuracy: Dict[str, Dict[str, float]] = {}
    means: Dict[str, float | None] = {}
    for result in ranked:
        key = result.relationship or "all"
        accuracy[key] = {str(fold): value for fold, value in sorted(result.accuracies.items())}
        means[key] = result.mean_accuracy
    relationship_means = [value for value in means.values() if value is not None]
    means["overall"] = float(np.mean(relationship_means)) if relationship_means else None

    return {
        "accuracy": accuracy,
        "means": means,
        "config": cfg.model_dump(),
        "config_hash": cfg.config_hash(),
        "seed": seed,
        "decisions": cfg.decision_log(),
        "ensemble": [member.model_dump() for member in ensemble],
    }


def write_summary(summary: Dict[str, Any], path: Path | str) -> Path:
    """Write the summary as sorted-key JSON; unwritable paths raise OSError."""
    path = Path(path)
    path.write_text(json.dumps(summary, sort_keys=True, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    return path


def read_summary(path: Path | str) -> Dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))
