"""Versioned binary checkpoint of a trained model.

Layout:

    b"FNN1"                      magic
    uint32 (little-endian)       length of the header in bytes
    header                       UTF-8 JSON: dims, run config, config hash, parameter names and shapes
    data                         every parameter as little-endian float64, C order, in header order

Parameter order is the `ParameterSet` insertion order documented in
`kinforest.model.params`.
"""

import json
import struct

from pathlib import Path
from typing import Any, Dict

import numpy as np

from kinforest.errors import CheckpointError
from kinforest.model.fnn_model import FnnModel
from kinforest.model.params import ParameterSet, init_parameters
from kinforest.run_config import RunConfig


MAGIC = b"FNN1"
VERSION = 1
DTYPE = np.dtype("<f8")
_LENGTH = struct.Struct("<I")


def checkpoint_header(model: FnnModel, extra: Dict[str, Any] | None = None) -> Dict[str, Any]:
    return {
        "version": VERSION,
        "d_in": model.d_in,
        "n_families": model.n_families,
        "config": model.cfg.model_dump(),
        "config_hash": model.cfg.config_hash(),
        "parameters": [[name, list(shape)] for name, shape in model.params.shapes()],
        **(extra or {}),
    }


def save_checkpoint(model: FnnModel, path: Path | str, extra: Dict[str, Any] | None = None) -> Path:
    """Write `model` to `path`; `extra` keys (seed, fold, ...) go into the header."""
    path = Path(path)
    header = json.dumps(checkpoint_header(model, extra), sort_keys=True).encode("utf-8")
    data = b"".join(np.ascontiguousarray(tensor.value, dtype=DTYPE).tobytes() for _, tensor in model.params.items())
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(MAGIC + _LENGTH.pack(len(header)) + header + data)
    return path


def read_header(blob: bytes, source: str = "checkpoint") -> tuple[Dict[str, Any], int]:
    """Parse magic and header; returns (header, offset of the data section)."""
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{source}: not a checkpoint (bad magic {blob[:4]!r})")
    if len(blob) < 8:
        raise CheckpointError(f"{source}: truncated header")
    (length,) = _LENGTH.unpack(blob[4:8])
    try:
        header = json.loads(blob[8:8 + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{source}: unreadable header ({e})") from e
    if header.get("version") != VERSION:
        raise CheckpointError(f"{source}: unsupported version {header.get('version')}")
    return header, 8 + length


def load_checkpoint(path: Path | str) -> tuple[FnnModel, Dict[str, Any]]:
    """Rebuild the model stored at `path`; returns (model, header)."""
    path = Path(path)
    blob = path.read_bytes()
    header, offset = read_header(blob, str(path))

    cfg = RunConfig(**header["config"])
    if cfg.config_hash() != header["config_hash"]:
        raise CheckpointError(f"{path}: config hash mismatch")

    d_in, n_families = int(header["d_in"]), int(header["n_families"])
    params: ParameterSet = init_parameters(cfg, d_in, n_families, np.random.default_rng(0))
    expected = [[name, list(shape)] for name, shape in params.shapes()]
    if header["parameters"] != expected:
        raise CheckpointError(f"{path}: parameter layout does not match the configuration")

    if (len(blob) - offset) % DTYPE.itemsize:
        raise CheckpointError(f"{path}: data section is not a whole number of float64 values")
    data = np.frombuffer(blob, dtype=DTYPE, offset=offset)
    if data.size != params.count():
        raise CheckpointError(f"{path}: expected {params.count()} values, found {data.size}")

    values: Dict[str, np.ndarray] = {}
    position = 0
    for name, shape in params.shapes():
        size = int(np.prod(shape))
        values[name] = data[position:position + size].reshape(shape)
        position += size
    params.load(values)
    return FnnModel(cfg=cfg, d_in=d_in, n_families=n_families, params=params), header
