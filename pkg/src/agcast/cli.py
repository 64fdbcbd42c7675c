"""Command line entry points, one subcommand per pipeline stage.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import sys

import click

from . import pipeline
from .errors import (
    AgcastError,
    ConfigError,
    NonFiniteLossError,
    SingularRegressionError,
    StageFailureError,
)

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_NUMERIC = (NonFiniteLossError, SingularRegressionError, FloatingPointError)


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageFailureError):
        return _exit_code(exc.cause)
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, _NUMERIC):
        return EXIT_NUMERIC
    if isinstance(exc, AgcastError):
        return EXIT_DATA
    return EXIT_DATA


def _config_options(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(), help="Pipeline config JSON.")(fn)
    fn = click.option("--out", "out_dir", default=None,
                      help="Override the config's output directory.")(fn)
    fn = click.option("--seed", default=None, type=int,
                      help="Override the config's master seed.")(fn)
    return fn


def _variants(variant: str) -> tuple[str, ...]:
    return ("with", "without") if variant == "both" else (variant,)


def _execute(stage: str, config_path, out_dir, seed, **kwargs) -> None:
    try:
        config = pipeline.load_config(config_path, out_override=out_dir,
                                      seed_override=seed)
        if stage == "run-all":
            written = pipeline.run_all(config, **kwargs)
        else:
            written = pipeline.run_stage(stage, config, **kwargs)
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_code(exc))
    for path in written:
        click.echo(str(path))


@click.group()
def main():
    """Outlier-aware commodity production forecasting pipeline."""


@main.command()
@_config_options
def ingest(config_path, out_dir, seed):
    """Load or generate series and write the monthly panel."""
    _execute("ingest", config_path, out_dir, seed)


@main.command()
@_config_options
def detect(config_path, out_dir, seed):
    """Estimate contamination and flag outlier months per index."""
    _execute("detect", config_path, out_dir, seed)


@main.command()
@_config_options
def relate(config_path, out_dir, seed):
    """Score correlation/causation and pair each commodity with indices."""
    _execute("relate", config_path, out_dir, seed)


@main.command()
@_config_options
def baselines(config_path, out_dir, seed):
    """Fit the five regression baselines per commodity."""
    _execute("baselines", config_path, out_dir, seed)


@main.command()
@_config_options
@click.option("--variant", default="both",
              type=click.Choice(["with", "without", "both"]),
              help="Which outlier-feature variants to train.")
def train(config_path, out_dir, seed, variant):
    """Train the sequence forecaster with and/or without outlier flags."""
    _execute("train", config_path, out_dir, seed, variants=_variants(variant))


@main.command()
@_config_options
def report(config_path, out_dir, seed):
    """Aggregate metrics into the comparison tables and plot data."""
    _execute("report", config_path, out_dir, seed)


@main.command("run-all")
@_config_options
@click.option("--variant", default="both",
              type=click.Choice(["with", "without", "both"]),
              help="Which outlier-feature variants to train.")
def run_all(config_path, out_dir, seed, variant):
    """Run every stage in order."""
    _execute("run-all", config_path, out_dir, seed, variants=_variants(variant))


if __name__ == "__main__":
    main()
