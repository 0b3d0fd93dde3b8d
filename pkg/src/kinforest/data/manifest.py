"""Embedding manifests (JSON Lines) and pair protocols (CSV).

A manifest file holds one header record `{"d_in": int}` followed by one record
per image: `{"image_id": str, "patches": {patch_kind: [float, ...]}}`. The pair
protocol lives in a CSV next to it (same stem, `.csv` suffix) unless a path is
given explicitly.
"""

import csv
import json
import logging

from collections import Counter, defaultdict
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Mapping, Sequence, Tuple

import numpy as np

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, model_validator

from kinforest.data.patch_kind import PatchKind
from kinforest.data.relationship import Relationship
from kinforest.errors import (
    DanglingIdError, DimensionMismatchError, ManifestValidationError, MissingPatchKindError,
    UnbalancedFoldError, UnknownImageError
)


logger = logging.getLogger(__name__)

PROTOCOL_HEADER = ["relationship", "fold", "parent_id", "child_id", "label", "family_parent", "family_child"]


class PairSample(BaseModel):
    """One parent/child pair of the verification protocol."""

    model_config = ConfigDict(frozen=True)

    relationship : Relationship    = Field(..., description="Kin relation the pair is evaluated under")
    fold         : int | None      = Field(default=None, ge=1, description="1-based fold index; None until assigned")
    parent_id    : str             = Field(..., min_length=1, description="Image id of the parent")
    child_id     : str             = Field(..., min_length=1, description="Image id of the child")
    y            : Literal[0, 1]   = Field(..., description="1 for kin, 0 for non-kin")
    z_parent     : int             = Field(..., ge=0, description="Family label of the parent image")
    z_child      : int             = Field(..., ge=0, description="Family label of the child image")

    @model_validator(mode="after")
    def kin_pairs_share_a_family(self) -> "PairSample":
        if self.y == 1 and self.z_parent != self.z_child:
            raise ValueError(f"kin pair {self.parent_id}/{self.child_id} has different family labels")
        return self

    @property
    def is_kin(self) -> bool: return self.y == 1

    def with_fold(self, fold: int) -> "PairSample":
        return self.model_copy(update={"fold": fold})


class ManifestHeader(BaseModel):
    d_in: int = Field(..., ge=0)


class ImageRecord(BaseModel):
    image_id: str = Field(..., min_length=1)
    patches: Dict[str, List[float]]


class DatasetManifest(BaseModel):
    """Patch embeddings per image plus the pair protocol over them."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    embeddings : Dict[str, Dict[PatchKind, np.ndarray]] = Field(default_factory=dict)
    pairs      : List[PairSample]                       = Field(default_factory=list)
    d_in       : int                                    = Field(default=0, ge=0)
    fold_slack : int                                    = Field(default=0, ge=0, description="Largest allowed |kin - non-kin| per fold")

    _stacked: Dict[str, np.ndarray] = PrivateAttr(default_factory=dict)

    # == Validation ============================================================================

    def validate_images(self) -> None:
        kinds = set(PatchKind)
        for image_id, patches in self.embeddings.items():
            missing = [kind.value for kind in PatchKind if kind not in patches]
            if missing:
                raise MissingPatchKindError(image_id, missing)
            extra = set(patches) - kinds
            if extra:
                raise ManifestValidationError(f"image '{image_id}' has unknown patch kind(s): {sorted(map(str, extra))}")
            for kind in PatchKind:
                vector = patches[kind]
                if vector.ndim != 1 or vector.shape[0] != self.d_in:
                    raise DimensionMismatchError(image_id, kind.value, self.d_in, int(vector.size))
                if not np.all(np.isfinite(vector)):
                    raise ManifestValidationError(f"image '{image_id}' patch '{kind.value}' holds non-finite values")

    def validate_pairs(self) -> None:
        for pair in self.pairs:
            if pair.parent_id not in self.embeddings:
                raise DanglingIdError(pair.parent_id, f"parent of a {pair.relationship.value} pair")
            if pair.child_id not in self.embeddings:
                raise DanglingIdError(pair.child_id, f"child of a {pair.relationship.value} pair")

        counts: Counter[Tuple[Relationship, int, int]] = Counter(
            (pair.relationship, pair.fold, pair.y) for pair in self.pairs if pair.fold is not None
        )
        for relationship, fold in sorted({(r, f) for r, f, _ in counts}, key=lambda rf: (rf[0].value, rf[1])):
            positives, negatives = counts[(relationship, fold, 1)], counts[(relationship, fold, 0)]
            if abs(positives - negatives) > self.fold_slack:
                raise UnbalancedFoldError(relationship.value, fold, positives, negatives)

    def ensure_valid(self) -> "DatasetManifest":
        self.validate_images()
        self.validate_pairs()
        return self

    # == Access ================================================================================

    @property
    def image_ids(self) -> List[str]: return list(self.embeddings)

    def has_image(self, image_id: str) -> bool: return image_id in self.embeddings

    def patches(self, image_id: str) -> Dict[PatchKind, np.ndarray]:
        try:
            return self.embeddings[image_id]
        except KeyError:
            raise UnknownImageError(image_id) from None

    def stacked(self, image_id: str) -> np.ndarray:
        """The 9 patch vectors of an image as a (9, d_in) array in graph order."""
        if image_id not in self._stacked:
            patches = self.patches(image_id)
            self._stacked[image_id] = np.stack([patches[kind] for kind in PatchKind])
        return self._stacked[image_id]

    def relationships(self) -> List[Relationship]:
        present = {pair.relationship for pair in self.pairs}
        return [r for r in Relationship if r in present]

    def pairs_for(self, relationship: Relationship | None = None, folds: Iterable[int] | None = None) -> List[PairSample]:
        fold_set = set(folds) if folds is not None else None
        return [
            pair for pair in self.pairs
            if (relationship is None or pair.relationship == relationship)
            and (fold_set is None or pair.fold in fold_set)
        ]

    def folds(self, relationship: Relationship | None = None) -> List[int]:
        return sorted({pair.fold for pair in self.pairs_for(relationship) if pair.fold is not None})

    def with_pairs(self, pairs: Sequence[PairSample]) -> "DatasetManifest":
        return DatasetManifest(embeddings=self.embeddings, pairs=list(pairs), d_in=self.d_in, fold_slack=self.fold_slack)

    def statistics(self) -> Dict[str, Any]:
        """Counts per relationship and fold, for `inspect`."""
        per_relationship: Dict[str, Dict[str, Any]] = {}
        for relationship in self.relationships():
            pairs = self.pairs_for(relationship)
            per_fold: Dict[str, Dict[str, int]] = defaultdict(lambda: {"kin": 0, "non_kin": 0})
            for pair in pairs:
                per_fold[str(pair.fold)]["kin" if pair.is_kin else "non_kin"] += 1
            per_relationship[relationship.value] = {
                "pairs": len(pairs),
                "folds": dict(sorted(per_fold.items())),
            }
        families = {p.z_parent for p in self.pairs} | {p.z_child for p in self.pairs}
        return {
            "images": len(self.embeddings),
            "d_in": self.d_in,
            "pairs": len(self.pairs),
            "families": len(families),
            "relationships": per_relationship,
        }


# ===========================================================================================
# Reading
# ===========================================================================================

def default_protocol_path(manifest_path: Path) -> Path:
    return Path(manifest_path).with_suffix(".csv")


def _read_images(path: Path) -> Tuple[Dict[str, Dict[PatchKind, np.ndarray]], int]:
    embeddings: Dict[str, Dict[PatchKind, np.ndarray]] = {}
    d_in: int | None = None
    known = set(PatchKind.values())

    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                if isinstance(raw, dict) and "image_id" not in raw:
                    header = ManifestHeader.model_validate(raw)
                    if d_in is not None and header.d_in != d_in:
                        raise ManifestValidationError(f"{path}:{line_number}: conflicting d_in header {header.d_in}")
                    d_in = header.d_in
                    continue
                record = ImageRecord.model_validate(raw)
            except json.JSONDecodeError as e:
                raise ManifestValidationError(f"{path}:{line_number}: not valid JSON: {e.msg}") from e
            except ValidationError as e:
                raise ManifestValidationError(f"{path}:{line_number}: malformed record: {e.errors()[0]['msg']}") from e

            if record.image_id in embeddings:
                raise ManifestValidationError(f"{path}:{line_number}: duplicate image id '{record.image_id}'")
            unknown = sorted(set(record.patches) - known)
            if unknown:
                raise ManifestValidationError(f"image '{record.image_id}' has unknown patch kind(s): {unknown}")
            embeddings[record.image_id] = {
                PatchKind(kind): np.asarray(vector, dtype=np.float64) for kind, vector in record.patches.items()
            }

    if d_in is None:
        first = next((v for patches in embeddings.values() for v in patches.values()), None)
        d_in = int(first.size) if first is not None else 0
    return embeddings, d_in


def read_protocol(path: Path) -> List[PairSample]:
    pairs: List[PairSample] = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            return pairs
        if [h.strip() for h in header] != PROTOCOL_HEADER:
            raise ManifestValidationError(f"{path}: expected header {','.join(PROTOCOL_HEADER)}, got {','.join(header)}")

        for line_number, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(PROTOCOL_HEADER):
                raise ManifestValidationError(f"{path}:{line_number}: expected {len(PROTOCOL_HEADER)} columns, got {len(row)}")
            fields = dict(zip(PROTOCOL_HEADER, (cell.strip() for cell in row)))
            try:
                pairs.append(PairSample(
                    relationship=Relationship.parse(fields["relationship"]),
                    fold=int(fields["fold"]) if fields["fold"] else None,
                    parent_id=fields["parent_id"],
                    child_id=fields["child_id"],
                    y=int(fields["label"]),  # type: ignore[arg-type]
                    z_parent=int(fields["family_parent"]),
                    z_child=int(fields["family_child"]),
                ))
            except (ValueError, ValidationError) as e:
                raise ManifestValidationError(f"{path}:{line_number}: invalid pair record: {e}") from e
    return pairs


def load_manifest(path: Path | str, protocol: Path | str | None = None) -> DatasetManifest:
    """Read and eagerly validate a manifest and its pair protocol.

    Without an explicit `protocol`, the sibling `.csv` is used when it exists;
    otherwise the manifest carries no pairs.
    """
    path = Path(path)
    embeddings, d_in = _read_images(path)

    protocol_path = Path(protocol) if protocol is not None else default_protocol_path(path)
    if protocol is None and not protocol_path.exists():
        logger.debug("no protocol next to %s, loading images only", path)
        pairs: List[PairSample] = []
    else:
        pairs = read_protocol(protocol_path)

    manifest = DatasetManifest(embeddings=embeddings, pairs=pairs, d_in=d_in).ensure_valid()
    logger.info("loaded %s: %d images, %d pairs, d_in=%d", path.name, len(embeddings), len(pairs), d_in)
    return manifest


# ===========================================================================================
# Writing
# ===========================================================================================

def write_protocol(pairs: Sequence[PairSample], path: Path | str) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(PROTOCOL_HEADER)
        for pair in pairs:
            writer.writerow([
                pair.relationship.value,
                "" if pair.fold is None else pair.fold,
                pair.parent_id,
                pair.child_id,
                pair.y,
                pair.z_parent,
                pair.z_child,
            ])
    return path


def write_manifest(manifest: DatasetManifest, path: Path | str, protocol: Path | str | None = None) -> Tuple[Path, Path]:
    """Write the JSONL manifest and its protocol CSV; returns both paths."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(ManifestHeader(d_in=manifest.d_in).model_dump_json() + "\n")
        for image_id, patches in manifest.embeddings.items():
            record = ImageRecord(
                image_id=image_id,
                patches={kind.value: patches[kind].tolist() for kind in PatchKind if kind in patches},
            )
            handle.write(record.model_dump_json() + "\n")

    protocol_path = write_protocol(manifest.pairs, protocol if protocol is not None else default_protocol_path(path))
    return path, protocol_path


def manifest_from_arrays(
    images: Mapping[str, np.ndarray], pairs: Sequence[PairSample] = ()
) -> DatasetManifest:
    """Build a validated manifest from (9, d_in) arrays in graph order."""
    embeddings = {
        image_id: {kind: np.asarray(array[kind.position], dtype=np.float64) for kind in PatchKind}
        for image_id, array in images.items()
    }
    d_in = next(iter(images.values())).shape[1] if images else 0
    return DatasetManifest(embeddings=embeddings, pairs=list(pairs), d_in=d_in).ensure_valid()
