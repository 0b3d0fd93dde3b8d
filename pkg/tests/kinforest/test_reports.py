import json

from pathlib import Path
from typing import Dict

import pytest

from kinforest.data import Relationship
from kinforest.errors import PreconditionError
from kinforest.run_config import RunConfig
from kinforest.training import CrossValidationResult, EpochReport, FoldResult, ReportWriter, build_summary, read_report, read_summary, write_summary
from kinforest.training.reports import epoch_records
from kinforest.training.sweep import grid_points


def _result(relationship: Relationship, accuracies: Dict[int, float]) -> CrossValidationResult:
    folds = [
        FoldResult(
            relationship=relationship.value, fold=fold, accuracy=value, test_pairs=4, train_pairs=16,
            epochs=[EpochReport(relationship=relationship.value, fold=fold, epoch=0, loss=1.0, accuracy=0.5, center_weight=0.01, lr=1e-5)],
        )
        for fold, value in accuracies.items()
    ]
    return CrossValidationResult(relationship=relationship.value, seed=7, folds=folds)


@pytest.fixture
def results():
    base = {Relationship.FS: 0.8, Relationship.FD: 0.7, Relationship.MS: 0.6, Relationship.MD: 0.9}
    return [_result(r, {fold: base[r] for fold in range(1, 6)}) for r in reversed(Relationship)]


class TestBuildSummary:

    def test_twenty_accuracies_and_five_means(self, results):
        summary = build_summary(results, RunConfig(), seed=7)
        assert list(summary["accuracy"]) == ["FS", "FD", "MS", "MD"]
        assert sum(len(folds) for folds in summary["accuracy"].values()) == 20
        assert set(summary["means"]) == {"FS", "FD", "MS", "MD", "overall"}
        assert summary["means"]["FD"] == pytest.approx(0.7)
        assert summary["means"]["overall"] == pytest.approx(0.75)
        assert summary["accuracy"]["MS"]["3"] == 0.6

    def test_no_results(self):
        summary = build_summary([], RunConfig(), seed=0)
        assert summary["accuracy"] == {}
        assert summary["means"] == {"overall": None}

    def test_records_config_and_decisions(self, results):
        member = RunConfig(h1=128)
        summary = build_summary(results, RunConfig(alpha=1.04), seed=3, ensemble=[member])
        assert summary["config"]["alpha"] == 1.04
        assert summary["config_hash"] == RunConfig(alpha=1.04).config_hash()
        assert summary["decisions"]["omega_neg_sign"] == "repulsion"
        assert summary["ensemble"][0]["h1"] == 128
        assert summary["seed"] == 3

    def test_written_summary_parses_back(self, results, tmp_path: Path):
        summary = build_summary(results, RunConfig(), seed=7)
        path = write_summary(summary, tmp_path / "summary.json")
        assert read_summary(path) == json.loads(json.dumps(summary))
        assert path.read_text().endswith("}\n")

    def test_unwritable_path(self, results, tmp_path: Path):
        with pytest.raises(OSError):
            write_summary(build_summary(results, RunConfig(), seed=7), tmp_path / "missing" / "summary.json")

    def test_fold_results_reject_impossible_accuracy(self):
        with pytest.raises(ValueError):
            FoldResult(fold=1, accuracy=1.5, test_pairs=4, train_pairs=16)


class TestReportWriter:

    def test_tagged_json_lines(self, results, tmp_path: Path):
        path = tmp_path / "out" / "report.jsonl"
        with ReportWriter(path) as report:
            report.header(RunConfig(), seed=7, relationships=["FS"])
            report.epochs(epoch_records(results))
            report.summary(build_summary(results, RunConfig(), seed=7))

        records = read_report(path)
        assert [r["record"] for r in records] == ["header"] + ["epoch"] * 20 + ["summary"]
        assert records[0]["relationships"] == ["FS"]
        assert records[1]["relationship"] == "MD" and records[1]["fold"] == 1
        assert records[-1]["means"]["overall"] == pytest.approx(0.75)

    def test_writing_outside_the_context(self, tmp_path: Path):
        with pytest.raises(RuntimeError, match="not open"):
            ReportWriter(tmp_path / "r.jsonl").write("epoch", {})


class TestGridPoints:

    def test_cartesian_product_in_key_order(self):
        points = grid_points({"omega0": [0.0, 0.01], "h1": [128, 256]})
        assert points == [
            {"omega0": 0.0, "h1": 128}, {"omega0": 0.0, "h1": 256},
            {"omega0": 0.01, "h1": 128}, {"omega0": 0.01, "h1": 256},
        ]

    def test_empty_grid(self):
        with pytest.raises(PreconditionError):
            grid_points({})
