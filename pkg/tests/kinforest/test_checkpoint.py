import json

from pathlib import Path

import numpy as np
import pytest

from kinforest.errors import CheckpointError
from kinforest.model import FnnModel
from kinforest.training import load_checkpoint, save_checkpoint
from kinforest.training.checkpoint import MAGIC


@pytest.fixture
def model(tiny_cfg) -> FnnModel:
    return FnnModel.initialize(tiny_cfg, d_in=6, n_families=4, seed=9, fold=2)


@pytest.fixture
def saved(model: FnnModel, tmp_path: Path) -> Path:
    return save_checkpoint(model, tmp_path / "run" / "model.fnn", extra={"seed": 9, "fold": 2, "relationship": "FS"})


class TestCheckpoint:

    def test_round_trip_restores_every_parameter(self, model, saved):
        loaded, header = load_checkpoint(saved)
        assert loaded.cfg == model.cfg
        assert (loaded.d_in, loaded.n_families) == (6, 4)
        assert loaded.params.names() == model.params.names()
        for name in model.params:
            assert np.array_equal(loaded.params[name].value, model.params[name].value)
        assert (header["seed"], header["fold"], header["relationship"]) == (9, 2, "FS")

    def test_restored_model_scores_identically(self, model, saved, rng):
        x_p, x_c = rng.standard_normal((9, 5, 6)), rng.standard_normal((9, 5, 6))
        loaded, _ = load_checkpoint(saved)
        assert np.array_equal(loaded.scores(x_p, x_c), model.scores(x_p, x_c))

    def test_same_model_same_bytes(self, model, saved, tmp_path):
        again = save_checkpoint(model, tmp_path / "again.fnn", extra={"seed": 9, "fold": 2, "relationship": "FS"})
        assert again.read_bytes() == saved.read_bytes()
        assert saved.read_bytes().startswith(MAGIC)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "notes.fnn"
        path.write_bytes(b"PK\x03\x04 not a model")
        with pytest.raises(CheckpointError, match="bad magic"):
            load_checkpoint(path)

    @pytest.mark.parametrize("cut, message", [(8, "expected .* values"), (3, "whole number")])
    def test_truncated_data(self, saved, cut, message):
        saved.write_bytes(saved.read_bytes()[:-cut])
        with pytest.raises(CheckpointError, match=message):
            load_checkpoint(saved)

    def test_tampered_config(self, saved):
        blob = saved.read_bytes()
        length = int.from_bytes(blob[4:8], "little")
        header = json.loads(blob[8:8 + length])
        header["config"]["alpha"] = 1.2
        edited = json.dumps(header, sort_keys=True).encode()
        saved.write_bytes(MAGIC + len(edited).to_bytes(4, "little") + edited + blob[8 + length:])
        with pytest.raises(CheckpointError, match="config hash mismatch"):
            load_checkpoint(saved)

    def test_unknown_version(self, saved):
        blob = saved.read_bytes()
        length = int.from_bytes(blob[4:8], "little")
        header = json.loads(blob[8:8 + length])
        header["version"] = 2
        edited = json.dumps(header, sort_keys=True).encode()
        saved.write_bytes(MAGIC + len(edited).to_bytes(4, "little") + edited + blob[8 + length:])
        with pytest.raises(CheckpointError, match="unsupported version 2"):
            load_checkpoint(saved)

    def test_checkpoint_errors_are_os_errors(self):
        assert issubclass(CheckpointError, OSError)
