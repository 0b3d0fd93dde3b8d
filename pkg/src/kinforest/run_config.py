"""Run configuration: a plain-text `key=value` file with `#` comments.

```
# published defaults, larger hidden layer
lr     = 1e-5
alpha  = 1.04
h1     = 128
```

Absent keys take the defaults declared on `RunConfig`. Unknown keys and values
that do not parse as numbers raise `ConfigParseError` with the offending line.
"""

import hashlib
import json

from pathlib import Path
from typing import Any, Dict, Iterable, List, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from kinforest.errors import ConfigParseError


class RunConfig(BaseModel):
    """Hyper-parameters of one training run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Optimization
    lr             : float = Field(default=1e-5, gt=0, description="Adam learning rate")
    batch          : int   = Field(default=64,   ge=1, description="Pairs per batch")
    epochs         : int   = Field(default=70,   ge=1, description="Epochs per fold")
    lr_decay       : float = Field(default=0.5,  gt=0, description="Multiplicative learning-rate decay factor")
    decay_interval : int   = Field(default=35,   ge=1, description="Epochs between learning-rate decays")
    center_lr      : float = Field(default=0.5,  gt=0, description="SGD rate of the center optimizer")

    # Loss fusion
    alpha          : float = Field(default=1.05, description="Temperature base of the center-loss weight")
    omega0         : float = Field(default=0.01, ge=0, description="Center-loss base weight")
    omega1         : float = Field(default=1.0,  description="Weight of the kinship BCE loss")
    omega2         : float = Field(default=1.0,  description="Weight of the kin-pair cross-generation loss")
    omega3         : float = Field(default=1.0,  description="Weight of the non-kin-pair cross-generation loss")
    omega4         : float = Field(default=1.0,  description="Weight of the direction (cosine) loss")
    omega5         : float = Field(default=1.0,  description="Weight of the triplet loss")
    omega6         : float = Field(default=1.0,  description="Weight of the part-based family-ID loss")
    omega_pos      : float = Field(default=1.0,  description="Inner weight of kin pairs in the cross-generation loss")
    omega_neg      : float = Field(default=-1.0, description="Inner weight of non-kin pairs; negative repels")
    margin         : float = Field(default=0.0,  description="Triplet margin")

    # Architecture
    h1             : int   = Field(default=256,  ge=1, description="First classifier hidden size")
    h2             : int   = Field(default=8,    ge=1, description="Second classifier hidden size (center-loss feature)")
    layers         : int   = Field(default=4,    ge=1, description="Gated graph layers")
    parts          : int   = Field(default=4,    ge=1, description="Parts of the family-ID split")
    d_h            : int   = Field(default=64,   ge=1, description="Node hidden size")
    share_params   : bool  = Field(default=False, description="Share gated-layer weights across the nine graphs")

    @model_validator(mode="after")
    def check_invariants(self) -> "RunConfig":
        if self.alpha < 1:
            raise ValueError(f"alpha must be >= 1, got {self.alpha}")
        if self.margin < 0:
            raise ValueError(f"margin must be >= 0, got {self.margin}")
        if not self.h1 > self.h2 >= 2:
            raise ValueError(f"hidden sizes must satisfy h1 > h2 >= 2, got h1={self.h1}, h2={self.h2}")
        if (self.layers * self.d_h) % self.parts != 0:
            raise ValueError(f"layers*d_h = {self.layers * self.d_h} is not divisible by parts={self.parts}")
        return self

    @property
    def feature_dim(self) -> int:
        """Length of F_p / F_c (one d_h block per layer)."""
        return self.layers * self.d_h

    def center_weight(self, epoch: int) -> float:
        return self.omega0 * self.alpha ** epoch

    def learning_rate(self, epoch: int) -> float:
        return self.lr * self.lr_decay ** (epoch // self.decay_interval)

    def with_overrides(self, overrides: Dict[str, Any]) -> "RunConfig":
        return _build({**self.model_dump(), **overrides}, source="overrides")

    def to_text(self) -> str:
        """Render in the config grammar; parse_config_text(to_text()) == self."""
        lines = []
        for key in RunConfig.model_fields:
            value = getattr(self, key)
            if isinstance(value, bool):
                rendered = "true" if value else "false"
            else:
                rendered = repr(value)
            lines.append(f"{key} = {rendered}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        canonical = json.dumps(self.model_dump(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def decision_log(self) -> Dict[str, str]:
        """Interpretation choices this run depends on, echoed in reports."""
        return {
            "threshold_rule": "predict kin when sigmoid(logit) > 0.5",
            "omega_neg_sign": "repulsion" if self.omega_neg < 0 else ("attraction" if self.omega_neg > 0 else "disabled"),
            "decay_schedule": f"lr * {self.lr_decay} ** (epoch // {self.decay_interval})",
            "edge_update": "e_next = e_in + relu(h) (node term added to the incoming edge state)",
            "triplet_reduction": "mean over triplets with positive loss",
            "center_optimizer": f"sgd(lr={self.center_lr}) on gradients rescaled by 1/(omega0*alpha**t) and per class by 1/(1 + batch count)",
        }


# ===========================================================================================
# Parsing
# ===========================================================================================

BOOL_WORDS = {"1": True, "true": True, "yes": True, "0": False, "false": False, "no": False}


def _coerce(key: str, raw: str, line: int | None, source: str) -> Any:
    field = RunConfig.model_fields[key]
    if field.annotation is bool:
        if raw.lower() not in BOOL_WORDS:
            raise ConfigParseError(f"'{key}' expects true/false/1/0, got '{raw}'", line, source)
        return BOOL_WORDS[raw.lower()]
    if field.annotation is int:
        try:
            return int(raw)
        except ValueError:
            raise ConfigParseError(f"'{key}' expects an integer, got '{raw}'", line, source) from None
    try:
        return float(raw)
    except ValueError:
        raise ConfigParseError(f"'{key}' expects a number, got '{raw}'", line, source) from None


def _parse_assignment(text: str, line: int | None, source: str) -> Tuple[str, Any]:
    if "=" not in text:
        raise ConfigParseError(f"expected key=value, got '{text}'", line, source)
    key, raw = (part.strip() for part in text.split("=", 1))
    key = key.lower()
    if key not in RunConfig.model_fields:
        raise ConfigParseError(f"unknown key '{key}'", line, source)
    if not raw:
        raise ConfigParseError(f"missing value for '{key}'", line, source)
    return key, _coerce(key, raw, line, source)


def _build(values: Dict[str, Any], source: str) -> RunConfig:
    try:
        return RunConfig(**values)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first.get("loc", ())) or "config"
        raise ConfigParseError(f"{where}: {first['msg']}", None, source) from e


def parse_config_text(text: str, source: str = "config") -> RunConfig:
    values: Dict[str, Any] = {}
    for line_number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        key, value = _parse_assignment(content, line_number, source)
        values[key] = value
    return _build(values, source)


def parse_config(path: Path | str | None) -> RunConfig:
    """Parse a config file; `None` yields all defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    return parse_config_text(path.read_text(encoding="utf-8"), source=str(path))


def parse_overrides(assignments: Iterable[str]) -> Dict[str, Any]:
    """`--set key=value` flags, validated against the same grammar."""
    overrides: Dict[str, Any] = {}
    for position, assignment in enumerate(assignments, start=1):
        key, value = _parse_assignment(assignment.strip(), position, "--set")
        overrides[key] = value
    return overrides


def parse_grid(assignments: Iterable[str]) -> Dict[str, List[Any]]:
    """`--grid key=v1,v2,...` flags for sweeps."""
    grid: Dict[str, List[Any]] = {}
    for position, assignment in enumerate(assignments, start=1):
        if "=" not in assignment:
            raise ConfigParseError(f"expected key=v1,v2,..., got '{assignment}'", position, "--grid")
        key, raw_values = (part.strip() for part in assignment.split("=", 1))
        values = [v.strip() for v in raw_values.split(",") if v.strip()]
        if not values:
            raise ConfigParseError(f"no values given for '{key}'", position, "--grid")
        grid[key.lower()] = [_parse_assignment(f"{key}={v}", position, "--grid")[1] for v in values]
    return grid
