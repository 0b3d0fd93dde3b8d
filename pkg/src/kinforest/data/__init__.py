from kinforest.data.folds import assign_folds, ensure_folds, fold_sizes, make_folds
from kinforest.data.forest_input import ForestBatch, ForestInput, build_batch, build_forest
from kinforest.data.manifest import (
    DatasetManifest, PairSample, default_protocol_path, load_manifest, manifest_from_arrays, read_protocol,
    write_manifest, write_protocol
)
from kinforest.data.patch_kind import GRAPH_COUNT, PatchKind
from kinforest.data.relationship import Relationship
from kinforest.data.synthetic import generate_synthetic


__all__ = [
    "DatasetManifest",
    "ForestBatch",
    "ForestInput",
    "GRAPH_COUNT",
    "PairSample",
    "PatchKind",
    "Relationship",
    "assign_folds",
    "build_batch",
    "build_forest",
    "default_protocol_path",
    "ensure_folds",
    "fold_sizes",
    "generate_synthetic",
    "load_manifest",
    "make_folds",
    "manifest_from_arrays",
    "read_protocol",
    "write_manifest",
    "write_protocol",
]
