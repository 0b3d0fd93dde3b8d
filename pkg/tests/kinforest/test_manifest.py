import json

from pathlib import Path

import numpy as np
import pytest

from kinforest.data import (
    DatasetManifest, PairSample, PatchKind, Relationship, build_batch, build_forest, load_manifest,
    manifest_from_arrays, write_manifest
)
from kinforest.errors import (
    DanglingIdError, DimensionMismatchError, ManifestValidationError, MissingPatchKindError, UnbalancedFoldError,
    UnknownImageError
)


def _pair(parent: str, child: str, y: int, fold: int | None = 1, z_parent: int = 0, z_child: int = 0) -> PairSample:
    return PairSample(relationship=Relationship.FS, fold=fold, parent_id=parent, child_id=child, y=y, z_parent=z_parent, z_child=z_child)


@pytest.fixture
def images(rng):
    return {name: rng.standard_normal((9, 3)) for name in ("dad", "son", "stranger")}

@pytest.fixture
def pairs():
    return [_pair("dad", "son", 1), _pair("dad", "stranger", 0, z_child=1)]

@pytest.fixture
def manifest(images, pairs) -> DatasetManifest:
    return manifest_from_arrays(images, pairs)


class TestLoadManifest:

    def test_round_trip(self, manifest: DatasetManifest, tmp_path: Path):
        path, protocol = write_manifest(manifest, tmp_path / "m.jsonl")
        assert protocol == tmp_path / "m.csv"

        loaded = load_manifest(path)
        assert loaded.d_in == 3
        assert loaded.pairs == manifest.pairs
        for image_id in manifest.image_ids:
            assert np.array_equal(loaded.stacked(image_id), manifest.stacked(image_id))

    def test_empty_manifest(self, tmp_path: Path):
        path, _ = write_manifest(DatasetManifest(), tmp_path / "empty.jsonl")
        loaded = load_manifest(path)
        assert loaded.embeddings == {} and loaded.pairs == [] and loaded.d_in == 0

    def test_d_in_is_inferred_without_a_header(self, manifest: DatasetManifest, tmp_path: Path):
        path, _ = write_manifest(manifest, tmp_path / "m.jsonl")
        lines = path.read_text().splitlines()[1:]
        path.write_text("\n".join(lines) + "\n")
        assert load_manifest(path).d_in == 3

    def test_missing_protocol_means_no_pairs(self, manifest: DatasetManifest, tmp_path: Path):
        path, protocol = write_manifest(manifest, tmp_path / "m.jsonl")
        protocol.unlink()
        assert load_manifest(path).pairs == []

    def test_image_with_eight_patches_names_the_missing_kind(self, manifest: DatasetManifest, tmp_path: Path):
        path, _ = write_manifest(manifest, tmp_path / "m.jsonl")
        lines = path.read_text().splitlines()
        record = json.loads(lines[1])
        del record["patches"]["nose"]
        lines[1] = json.dumps(record)
        path.write_text("\n".join(lines) + "\n")

        with pytest.raises(MissingPatchKindError, match="nose") as error:
            load_manifest(path)
        assert error.value.image_id == record["image_id"]

    def test_protocol_with_a_bad_header(self, manifest: DatasetManifest, tmp_path: Path):
        path, protocol = write_manifest(manifest, tmp_path / "m.jsonl")
        protocol.write_text("a,b,c\n")
        with pytest.raises(ManifestValidationError, match="expected header"):
            load_manifest(path)

    def test_malformed_json_reports_the_line(self, tmp_path: Path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"d_in": 3}\n{not json\n')
        with pytest.raises(ManifestValidationError, match=":2:"):
            load_manifest(path)


class TestManifestValidation:

    def test_dimension_mismatch(self, images, pairs):
        manifest = manifest_from_arrays(images, pairs)
        manifest.embeddings["son"][PatchKind.MOUTH] = np.zeros(4)
        with pytest.raises(DimensionMismatchError, match="son.*mouth"):
            manifest.ensure_valid()

    def test_dangling_id(self, images):
        with pytest.raises(DanglingIdError, match="ghost"):
            manifest_from_arrays(images, [_pair("dad", "ghost", 1)])

    def test_unbalanced_fold(self, images):
        with pytest.raises(UnbalancedFoldError) as error:
            manifest_from_arrays(images, [_pair("dad", "son", 1)])
        assert (error.value.relationship, error.value.fold) == ("FS", 1)

    def test_pairs_without_folds_are_not_balance_checked(self, images):
        manifest = manifest_from_arrays(images, [_pair("dad", "son", 1, fold=None)])
        assert manifest.folds() == []

    def test_kin_pairs_must_share_a_family(self):
        with pytest.raises(ValueError, match="different family"):
            _pair("dad", "son", 1, z_child=2)

    def test_unknown_image_lookup(self, manifest: DatasetManifest):
        with pytest.raises(UnknownImageError):
            manifest.patches("nobody")


class TestBuildForest:

    def test_graphs_follow_patch_kind_order(self, manifest: DatasetManifest, images):
        forest = build_forest("dad", "son", manifest)
        assert forest.graph_count == 9
        for kind in PatchKind:
            assert np.array_equal(forest.x_parent[kind.position], images["dad"][kind.position])
            assert np.array_equal(forest.x_child[kind.position], images["son"][kind.position])

    def test_same_image_on_both_sides(self, manifest: DatasetManifest):
        forest = build_forest("dad", "dad", manifest)
        assert np.array_equal(forest.x_parent, forest.x_child)

    def test_missing_patch_fails_before_building(self, images):
        manifest = DatasetManifest(
            embeddings={
                "dad": {kind: images["dad"][kind.position] for kind in PatchKind},
                "son": {kind: images["son"][kind.position] for kind in PatchKind if kind is not PatchKind.NOSE},
            },
            d_in=3,
        )
        with pytest.raises(MissingPatchKindError, match="nose"):
            build_forest("dad", "son", manifest)

    def test_unknown_id(self, manifest: DatasetManifest):
        with pytest.raises(UnknownImageError):
            build_forest("dad", "ghost", manifest)

    def test_batch_is_graph_major(self, manifest: DatasetManifest):
        batch = build_batch(manifest.pairs, manifest)
        assert batch.x_parent.shape == (9, 2, 3)
        assert batch.y.tolist() == [1.0, 0.0]
        assert batch.z_child.tolist() == [0, 1]
