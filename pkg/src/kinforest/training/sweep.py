"""Explicit grid sweeps over run-config keys (hidden sizes, ω₀, α, ...)."""

import itertools
import logging

from typing import Any, Dict, List, Sequence

from pydantic import BaseModel, Field

from kinforest.data.manifest import DatasetManifest
from kinforest.data.relationship import Relationship
from kinforest.errors import PreconditionError
from kinforest.run_config import RunConfig
from kinforest.training.cross_validation import run_relationships
from kinforest.training.reports import build_summary


logger = logging.getLogger(__name__)


class SweepRow(BaseModel):
    point    : Dict[str, Any]            = Field(..., description="Overridden keys of this grid point")
    means    : Dict[str, float | None]   = Field(..., description="Mean accuracy per relationship plus 'overall'")


def grid_points(grid: Dict[str, List[Any]]) -> List[Dict[str, Any]]:
    """Cartesian product of the grid, keys in the order given."""
    if not grid:
        raise PreconditionError("sweep grid is empty")
    keys = list(grid)
    return [dict(zip(keys, values)) for values in itertools.product(*(grid[key] for key in keys))]


def run_sweep(
    manifest: DatasetManifest,
    base: RunConfig,
    grid: Dict[str, List[Any]],
    relationships: Sequence[Relationship],
    seed: int = 0,
    workers: int = 1,
    timeout_seconds: float = 3600,
) -> List[SweepRow]:
    """Five-fold protocol at every grid point; each point starts from `base`."""
    rows: List[SweepRow] = []
    points = grid_points(grid)
    for position, point in enumerate(points, start=1):
        cfg = base.with_overrides(point)
        logger.info("sweep point %d/%d: %s", position, len(points), point)
        results = run_relationships(manifest, cfg, relationships, seed, workers=workers, timeout_seconds=timeout_seconds)
        rows.append(SweepRow(point=point, means=build_summary(results, cfg, seed)["means"]))
    return rows
