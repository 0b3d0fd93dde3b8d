"""Exception hierarchy for kinforest.

Every leaf also derives from the builtin a caller would naturally catch, so
`except ValueError` keeps working for code that does not know about kinforest.
"""

from typing import Any, Dict, Sequence


class KinForestError(Exception):
    """Root of every error raised by kinforest."""


# ===========================================================================================
# Tensor / contract errors
# ===========================================================================================

class DimensionError(KinForestError, ValueError):
    """Operands have incompatible shapes."""

    def __init__(self, op: str, *shapes: Sequence[int]):
        self.op = op
        self.shapes = [tuple(s) for s in shapes]
        rendered = " vs ".join(str(s) for s in self.shapes)
        super().__init__(f"{op}: incompatible shapes {rendered}")


class ContractError(KinForestError, ValueError):
    """A call violated an API contract (wrong arity, non-scalar loss, bad label...)."""


class PreconditionError(KinForestError, ValueError):
    """An operation's precondition does not hold for the given inputs."""


# ===========================================================================================
# Manifest validation
# ===========================================================================================

class ManifestValidationError(KinForestError, ValueError):
    """Base class for embedding manifest / pair protocol validation failures."""


class MissingPatchKindError(ManifestValidationError):
    def __init__(self, image_id: str, missing: Sequence[str]):
        self.image_id = image_id
        self.missing = list(missing)
        super().__init__(f"image '{image_id}' is missing patch kind(s): {', '.join(self.missing)}")


class DimensionMismatchError(ManifestValidationError):
    def __init__(self, image_id: str, patch_kind: str, expected: int, actual: int):
        self.image_id = image_id
        self.patch_kind = patch_kind
        super().__init__(f"image '{image_id}' patch '{patch_kind}' has dimension {actual}, expected {expected}")


class DanglingIdError(ManifestValidationError):
    def __init__(self, image_id: str, where: str):
        self.image_id = image_id
        super().__init__(f"pair references unknown image '{image_id}' ({where})")


class UnbalancedFoldError(ManifestValidationError):
    def __init__(self, relationship: str, fold: int, positives: int, negatives: int):
        self.relationship = relationship
        self.fold = fold
        super().__init__(
            f"fold {fold} of relationship {relationship} is unbalanced: {positives} kin vs {negatives} non-kin pairs"
        )


class UnknownImageError(KinForestError, LookupError):
    def __init__(self, image_id: str):
        self.image_id = image_id
        super().__init__(f"unknown image id '{image_id}'")


# ===========================================================================================
# Configuration
# ===========================================================================================

class ConfigParseError(KinForestError, ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "config"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


# ===========================================================================================
# Numerics
# ===========================================================================================

class NonFiniteError(KinForestError, ArithmeticError):
    """A value that must be finite was NaN or infinite."""


class NonFiniteGradientError(NonFiniteError):
    def __init__(self, parameter: str):
        self.parameter = parameter
        super().__init__(f"non-finite gradient for parameter '{parameter}'")


class NonFiniteLossError(NonFiniteError):
    def __init__(self, components: Dict[str, Any]):
        self.components = dict(components)
        breakdown = ", ".join(f"{k}={v}" for k, v in self.components.items())
        super().__init__(f"fused loss is not finite ({breakdown})")


class CheckpointError(KinForestError, OSError):
    """Checkpoint file is malformed or does not match the expected model."""
