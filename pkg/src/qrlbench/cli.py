"""Command-line entry points: run, sweep, report, validate."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .errors import ConfigurationError
from .harness.config import load_config
from .harness.report import write_report
from .harness.runner import run_experiment
from .harness.sweep import SWEEP_AXES, run_sweep


@click.group()
def main():
    """Benchmark suite for quantum reinforcement learning agents."""


def _load(config_path: str):
    try:
        return load_config(config_path)
    except ConfigurationError as exc:
        raise click.ClickException(str(exc)) from exc


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
def run(config_path):
    """Run every seed of the experiment described by CONFIG_PATH."""
    cfg = _load(config_path)
    summary = run_experiment(cfg)
    agg = summary["aggregate"]
    click.echo(
        f"{cfg.name}: final rolling return "
        f"{agg['final_rolling_return_mean']:.3f} ± {agg['final_rolling_return_std']:.3f} "
        f"({agg['seeds_reaching_threshold']}/{len(cfg.seeds)} seeds reached "
        f"{summary['threshold_return']:.3f}); output in {cfg.output_dir}"
    )


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--axis", required=True, type=click.Choice(sorted(SWEEP_AXES)))
@click.option(
    "--values",
    default=None,
    help="Comma-separated axis values (defaults to the standard set).",
)
def sweep(config_path, axis, values):
    """Rerun the experiment across one ablation axis."""
    cfg = _load(config_path)
    parsed = None
    if values is not None:
        parsed = [int(v) if v.isdigit() else v for v in values.split(",")]
    try:
        comparison = run_sweep(cfg, axis, parsed)
    except ConfigurationError as exc:
        raise click.ClickException(str(exc)) from exc
    for row in comparison["values"]:
        click.echo(
            f"{axis}={row['axis_value']}: final "
            f"{row['final_rolling_return_mean']:.3f} ± "
            f"{row['final_rolling_return_std']:.3f}, "
            f"{row['total_circuit_executions']} executions, "
            f"{row['total_anneal_jobs']} anneal jobs"
        )
    click.echo(f"comparison table: {cfg.output_dir / f'sweep_{axis}.json'}")


@main.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", default=None, type=click.Path(file_okay=False))
def report(run_dir, out):
    """Render plot-ready CSV, markdown table, and PNG curves from finished runs."""
    try:
        artifacts = write_report(Path(run_dir), Path(out) if out else None)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"wrote {artifacts['csv']}")
    click.echo(f"wrote {artifacts['markdown']}")
    for path in artifacts["figures"].values():
        click.echo(f"wrote {path}")


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
def validate(config_path):
    """Check a config file without running anything."""
    cfg = _load(config_path)
    click.echo(
        f"ok: {cfg.name} ({cfg.family} on {cfg.environment}, "
        f"{len(cfg.seeds)} seeds, {cfg.max_env_steps} steps)"
    )


if __name__ == "__main__":
    sys.exit(main())
