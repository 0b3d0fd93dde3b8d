from contextlib import contextmanager
from pathlib import Path
from typing import Any, Callable, Dict, Generator, List, Sequence, Tuple

import click, numpy as np

from rich.console import Console
from rich.table import Table
from rich.traceback import install as install_traceback

from kinforest.data.folds import ensure_folds
from kinforest.data.manifest import DatasetManifest, load_manifest, write_manifest
from kinforest.data.relationship import Relationship
from kinforest.data.synthetic import generate_synthetic
from kinforest.errors import KinForestError
from kinforest.logs import LogLevel, configure_logging
from kinforest.run_config import RunConfig, parse_config, parse_grid, parse_overrides


console = Console()
err_console = Console(stderr=True)
install_traceback(show_locals=False, word_wrap=True, console=err_console)

RELATIONSHIP_CHOICES = [r.value for r in Relationship] + ["all"]


class Context:
    def __init__(self):
        self.log_level: LogLevel | None = None

    def settings(self):
        """Return the settings for the current environment."""
        from kinforest.settings import get_settings
        return get_settings()

    def start_logging(self, log_level: str | None) -> None:
        level = LogLevel(log_level) if log_level else self.settings().app.log_level
        configure_logging(level, err_console)

    def run_config(self, config: Path | None, assignments: Sequence[str]) -> RunConfig:
        cfg = parse_config(config)
        overrides = parse_overrides(assignments)
        return cfg.with_overrides(overrides) if overrides else cfg

    def manifest(self, manifest: Path, protocol: Path | None, fold_seed: int = 0) -> DatasetManifest:
        return ensure_folds(load_manifest(manifest, protocol), seed=fold_seed)


@contextmanager
def reported_errors() -> Generator[None, None, None]:
    """Turn validation and I/O failures into exit code 1 with a message on stderr."""
    try:
        yield
    except (KinForestError, OSError) as e:
        raise click.ClickException(f"{type(e).__name__}: {e}") from e


# ===========================================================================================
# Shared options
# ===========================================================================================

def _compose(*decorators: Callable) -> Callable:
    def apply(f: Callable) -> Callable:
        for decorator in reversed(decorators):
            f = decorator(f)
        return f
    return apply


manifest_options = _compose(
    click.option('--manifest', type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True, help='Embedding manifest (JSON Lines).'),
    click.option('--protocol', type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help='Protocol CSV; defaults to the manifest path with a .csv suffix.'),
)

run_options = _compose(
    click.option('--config', type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help='Run config file (key=value lines).'),
    click.option('--set', 'assignments', multiple=True, metavar='KEY=VALUE', help='Override a config key; repeatable.'),
    click.option('--seed', type=int, default=0, show_default=True, help='Run seed; all randomness flows from it.'),
    click.option('--relationship', type=click.Choice(RELATIONSHIP_CHOICES, case_sensitive=False), default='all', show_default=True, help='Relationship to run.'),
    click.option('--log-level', type=click.Choice(LogLevel.choices()), default=None, help='Log level; defaults to APP__LOG_LEVEL.'),
)


def _relationship(choice: str) -> Relationship | None:
    return None if choice.lower() == "all" else Relationship.parse(choice)


def _percent(value: float | None) -> str:
    return "-" if value is None else f"{100.0 * value:.2f}"


def accuracy_table(summary: Dict[str, Any], title: str = "Accuracy (%)") -> Table:
    """Per-fold rows plus a mean row, one column per relationship and a Mean column."""
    table = Table(title=title)
    table.add_column("Fold")
    for relationship in Relationship:
        table.add_column(relationship.label, justify="right")
    table.add_column("Mean", justify="right")

    accuracy: Dict[str, Dict[str, float]] = summary["accuracy"]
    folds = sorted({fold for per_fold in accuracy.values() for fold in per_fold}, key=int)
    for fold in folds:
        values = [accuracy.get(r.value, {}).get(fold) for r in Relationship]
        present = [v for v in values if v is not None]
        table.add_row(fold, *map(_percent, values), _percent(float(np.mean(present)) if present else None))

    means = summary["means"]
    table.add_row("Mean", *(_percent(means.get(r.value)) for r in Relationship), _percent(means.get("overall")), style="bold")
    return table


# ===========================================================================================
# Commands
# ===========================================================================================

@click.group()
@click.pass_context
def cli(ctx: click.Context) -> None:
    """kinforest: forest neural network kinship verification."""
    ctx.obj = Context()


@cli.command('gen-synth')
@click.option('--families', type=int, default=50, show_default=True, help='Number of synthetic families.')
@click.option('--d-in', type=int, default=32, show_default=True, help='Embedding dimension.')
@click.option('--noise', type=float, default=0.1, show_default=True, help='Per-patch Gaussian noise scale.')
@click.option('--seed', type=int, default=0, show_default=True, help='Generator seed.')
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), required=True, help='Manifest path to write; the protocol CSV goes next to it.')
@click.option('--log-level', type=click.Choice(LogLevel.choices()), default=None, help='Log level; defaults to APP__LOG_LEVEL.')
@click.pass_obj
def gen_synth(ctx: Context, families: int, d_in: int, noise: float, seed: int, out: Path, log_level: str | None) -> None:
    """Write a synthetic manifest and its five-fold protocol."""
    ctx.start_logging(log_level)
    with reported_errors():
        manifest = generate_synthetic(families, d_in, noise, seed)
        manifest_path, protocol_path = write_manifest(manifest, out)
    console.print(f"wrote {manifest_path} ({len(manifest.embeddings)} images) and {protocol_path} ({len(manifest.pairs)} pairs)")


@cli.command()
@manifest_options
@run_options
@click.option('--fold', type=click.IntRange(1, 5), default=1, show_default=True, help='Held-out fold.')
@click.option('--out', type=click.Path(file_okay=False, path_type=Path), required=True, help='Directory for the checkpoint and epoch report.')
@click.pass_obj
def train(ctx: Context, manifest: Path, protocol: Path | None, config: Path | None, assignments: Tuple[str, ...], seed: int, relationship: str, log_level: str | None, fold: int, out: Path) -> None:
    """Train one fold and score its held-out pairs."""
    from kinforest.training.checkpoint import save_checkpoint
    from kinforest.training.reports import ReportWriter
    from kinforest.training.trainer import FoldRun, evaluate_fold

    ctx.start_logging(log_level)
    with reported_errors():
        cfg = ctx.run_config(config, assignments)
        data = ctx.manifest(manifest, protocol, seed)
        rel = _relationship(relationship)
        train_pairs = data.pairs_for(rel, folds=[f for f in data.folds(rel) if f != fold])

        run = FoldRun.start(data, cfg, train_pairs, seed, fold, rel)
        run.fit()
        accuracy = evaluate_fold(run.model, data, fold, rel)

        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(run.model, out / "model.fnn", extra={"seed": seed, "fold": fold, "relationship": relationship})
        with ReportWriter(out / "report.jsonl") as report:
            report.header(cfg, seed, fold=fold, relationship=relationship)
            report.epochs(run.reports)
            report.summary({"fold": fold, "accuracy": accuracy})

    console.print(f"{relationship} fold {fold}: accuracy {_percent(accuracy)}% -> {out}")


@cli.command('eval')
@manifest_options
@click.option('--checkpoint', type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True, help='Checkpoint written by `train`.')
@click.option('--fold', type=click.IntRange(1, 5), default=None, help='Fold to score; defaults to the checkpoint\'s held-out fold.')
@click.option('--relationship', type=click.Choice(RELATIONSHIP_CHOICES, case_sensitive=False), default=None, help='Defaults to the checkpoint\'s relationship.')
@click.option('--log-level', type=click.Choice(LogLevel.choices()), default=None, help='Log level; defaults to APP__LOG_LEVEL.')
@click.pass_obj
def evaluate(ctx: Context, manifest: Path, protocol: Path | None, checkpoint: Path, fold: int | None, relationship: str | None, log_level: str | None) -> None:
    """Score a checkpoint on one fold."""
    from kinforest.training.checkpoint import load_checkpoint
    from kinforest.training.trainer import evaluate_fold

    ctx.start_logging(log_level)
    with reported_errors():
        model, header = load_checkpoint(checkpoint)
        data = ctx.manifest(manifest, protocol, int(header.get("seed", 0)))
        fold = fold if fold is not None else header.get("fold")
        relationship = relationship or header.get("relationship", "all")
        if fold is None:
            raise click.UsageError("checkpoint has no fold; pass --fold")
        if model.d_in != data.d_in:
            raise click.ClickException(f"checkpoint expects d_in={model.d_in}, manifest has {data.d_in}")
        accuracy = evaluate_fold(model, data, fold, _relationship(relationship))
    console.print(f"{relationship} fold {fold}: accuracy {_percent(accuracy)}%")


@cli.command()
@manifest_options
@run_options
@click.option('--ensemble', 'ensemble_configs', multiple=True, type=click.Path(exists=True, dir_okay=False, path_type=Path), help='Extra member config; repeatable.')
@click.option('--out', type=click.Path(file_okay=False, path_type=Path), required=True, help='Directory for summary.json and report.jsonl.')
@click.pass_obj
def cv(ctx: Context, manifest: Path, protocol: Path | None, config: Path | None, assignments: Tuple[str, ...], seed: int, relationship: str, log_level: str | None, ensemble_configs: Tuple[Path, ...], out: Path) -> None:
    """Run the five-fold protocol and print the per-relationship summary."""
    from kinforest.training.cross_validation import run_relationships
    from kinforest.training.reports import ReportWriter, build_summary, epoch_records, write_summary

    ctx.start_logging(log_level)
    runtime = ctx.settings().runtime
    with reported_errors():
        cfg = ctx.run_config(config, assignments)
        members = [ctx.run_config(path, assignments) for path in ensemble_configs]
        data = ctx.manifest(manifest, protocol, seed)

        results = run_relationships(
            data, cfg, Relationship.select(relationship), seed, members,
            workers=runtime.fold_workers, timeout_seconds=runtime.fold_timeout_seconds,
        )
        summary = build_summary(results, cfg, seed, members)

        out.mkdir(parents=True, exist_ok=True)
        write_summary(summary, out / "summary.json")
        with ReportWriter(out / "report.jsonl") as report:
            report.header(cfg, seed, ensemble=[member.model_dump() for member in members])
            report.epochs(epoch_records(results))
            report.summary(summary)

    console.print(accuracy_table(summary))


@cli.command()
@click.option('--seed', 'seeds', type=int, multiple=True, help='Seed to check; repeatable. Defaults to the three suite seeds.')
@click.option('--coords', type=int, default=8, show_default=True, help='Coordinates checked per parameter tensor; 0 checks all.')
@click.option('--log-level', type=click.Choice(LogLevel.choices()), default=None, help='Log level; defaults to APP__LOG_LEVEL.')
@click.pass_obj
def gradcheck(ctx: Context, seeds: Tuple[int, ...], coords: int, log_level: str | None) -> None:
    """Finite-difference check of the full model's gradients."""
    from kinforest.training.gradient_suite import SUITE_SEEDS, TOLERANCE, run_gradient_suite

    ctx.start_logging(log_level)
    with reported_errors():
        results = run_gradient_suite(seeds or SUITE_SEEDS, eps=ctx.settings().runtime.gradcheck_eps, coords_per_param=coords or None)

    table = Table(title="Gradient check")
    table.add_column("Seed", justify="right")
    table.add_column("Max relative error", justify="right")
    table.add_column("Worst parameter")
    table.add_column("Coordinates", justify="right")
    for result in results:
        table.add_row(str(result.seed), f"{result.report.max_relative_error:.3e}", result.report.worst_parameter or "-", str(result.report.checked))
    console.print(table)

    worst = max(result.report.max_relative_error for result in results)
    console.print(f"max relative error {worst:.3e}")
    if worst >= TOLERANCE:
        raise click.ClickException(f"max relative error {worst:.3e} is not below {TOLERANCE:g}")


@cli.command()
@manifest_options
@click.option('--log-level', type=click.Choice(LogLevel.choices()), default=None, help='Log level; defaults to APP__LOG_LEVEL.')
@click.pass_obj
def inspect(ctx: Context, manifest: Path, protocol: Path | None, log_level: str | None) -> None:
    """Print manifest statistics: images, families, pairs per relationship and fold."""
    ctx.start_logging(log_level)
    with reported_errors():
        stats = ctx.manifest(manifest, protocol).statistics()

    console.print(f"images: {stats['images']}  d_in: {stats['d_in']}  families: {stats['families']}  pairs: {stats['pairs']}")
    table = Table(title="Pairs per fold (kin / non-kin)")
    table.add_column("Relationship")
    folds = sorted({fold for rel in stats["relationships"].values() for fold in rel["folds"]})
    for fold in folds:
        table.add_column(f"Fold {fold}", justify="right")
    table.add_column("Total", justify="right")
    for code, rel in stats["relationships"].items():
        cells = [f"{rel['folds'][f]['kin']} / {rel['folds'][f]['non_kin']}" if f in rel["folds"] else "-" for f in folds]
        table.add_row(Relationship(code).label, *cells, str(rel["pairs"]))
    console.print(table)


@cli.command()
@manifest_options
@run_options
@click.option('--grid', 'grid_flags', multiple=True, required=True, metavar='KEY=V1,V2,...', help='Values to sweep for one key; repeatable.')
@click.option('--out', type=click.Path(file_okay=False, path_type=Path), required=True, help='Directory for sweep.json.')
@click.pass_obj
def sweep(ctx: Context, manifest: Path, protocol: Path | None, config: Path | None, assignments: Tuple[str, ...], seed: int, relationship: str, log_level: str | None, grid_flags: Tuple[str, ...], out: Path) -> None:
    """Run the five-fold protocol at every point of an explicit grid."""
    import json

    from kinforest.training.sweep import run_sweep

    ctx.start_logging(log_level)
    runtime = ctx.settings().runtime
    with reported_errors():
        cfg = ctx.run_config(config, assignments)
        grid = parse_grid(grid_flags)
        data = ctx.manifest(manifest, protocol, seed)
        rows = run_sweep(
            data, cfg, grid, Relationship.select(relationship), seed,
            workers=runtime.fold_workers, timeout_seconds=runtime.fold_timeout_seconds,
        )
        out.mkdir(parents=True, exist_ok=True)
        payload: List[Dict[str, Any]] = [row.model_dump() for row in rows]
        (out / "sweep.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    table = Table(title="Sweep mean accuracy (%)")
    for key in grid:
        table.add_column(key)
    for r in Relationship:
        table.add_column(r.label, justify="right")
    table.add_column("Mean", justify="right")
    for row in rows:
        table.add_row(*(str(row.point[key]) for key in grid), *(_percent(row.means.get(r.value)) for r in Relationship), _percent(row.means.get("overall")))
    console.print(table)


def main() -> None:
    cli()
