"""Command-line front end.

A thin client over the same handlers the HTTP service exposes: subcommands
parse files and flags into a :class:`RunConfig`, run it, and render the
resulting report as CSV (default) or JSON.  Exit codes: 0 success, 2 usage,
3 parse error, 4 validation error, 5 numerical error.  The only environment
variable honored is ITMOR_OUTPUT_DIR, which prefixes relative --output
paths.
"""
from __future__ import annotations

import os
import sys
from pathlib import Path

import click

from . import __version__
from .errors import ItmorError, NumericalError, ParseError, ValidationError
from .linmodel import StateSubset
from .report import render_csv, render_json
from .runner import RunConfig, run

EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_NUMERICAL = 5


def _parse_subset(text: str) -> StateSubset:
    text = text.strip()
    if not text:
        return StateSubset(())
    try:
        return StateSubset.of(*(int(tok) for tok in text.split(",")))
    except ValueError as exc:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}") from exc


def _parse_floats(text: str | None):
    if text is None:
        return None
    try:
        return [float(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}") from exc


def _parse_grid(text: str | None):
    if text is None:
        return None
    try:
        return [int(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}") from exc


def _resolve_output(output: str | None) -> Path | None:
    if output is None:
        return None
    path = Path(output)
    base = os.environ.get("ITMOR_OUTPUT_DIR")
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def _execute(config: RunConfig, fmt: str) -> None:
    try:
        report = run(config)
    except ParseError as exc:
        click.echo(f"PARSE_ERROR: {exc}", err=True)
        sys.exit(EXIT_PARSE)
    except ValidationError as exc:
        click.echo(f"VALIDATION_ERROR: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    except (NumericalError, ItmorError) as exc:
        click.echo(f"NUMERICAL_ERROR: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    if config.output_path is None:
        text = render_json(report) if fmt == "json" else render_csv(report)
        click.echo(text, nl=False)


mode_option = click.option(
    "--mode", type=click.Choice(["filter", "exact"]), default="filter",
    show_default=True, help="Belief-propagation path or exact-observation shortcut.",
)
innovation_option = click.option(
    "--innovation", type=click.Choice(["ddt", "bbt"]), default="ddt",
    show_default=True, help="Innovation noise term of the filters.",
)
format_option = click.option(
    "--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
    show_default=True, help="Report serialization.",
)
output_option = click.option(
    "--output", type=click.Path(dir_okay=False), default=None,
    help="Write the report here instead of stdout.",
)
tol_option = click.option(
    "--tol", type=float, default=1e-12, show_default=True,
    help="Settling tolerance for asymptotic values.",
)
timestamp_option = click.option(
    "--timestamp", is_flag=True, default=False,
    help="Add a UTC timestamp to the report metadata.",
)


@click.group()
@click.version_option(__version__, prog_name="itmor")
def main() -> None:
    """Finite-horizon comparison and reduction of linear Gaussian models."""


@main.command()
@click.argument("model_file", type=click.Path(dir_okay=False))
@click.option("--frozen", default="", help="Comma-separated state indices to freeze (0-based).")
@click.option("--frozen-value", default=None, help="Constants for the frozen states.")
@click.option("--horizon", type=click.IntRange(min=0), default=100, show_default=True)
@mode_option
@innovation_option
@format_option
@output_option
@timestamp_option
def analyze(model_file, frozen, frozen_value, horizon, mode, innovation, fmt, output, timestamp):
    """Step-value trajectory of one frozen subset against the full model."""
    flags = {"mode": mode, "innovation": innovation, "format": fmt, "timestamp": timestamp}
    fv = _parse_floats(frozen_value)
    if fv is not None:
        flags["frozen_value"] = fv
    config = RunConfig(
        command="analyze", model_path=Path(model_file), horizon=horizon,
        subset=_parse_subset(frozen), output_path=_resolve_output(output), flags=flags,
    )
    _execute(config, fmt)


@main.command()
@click.argument("model_file", type=click.Path(dir_okay=False))
@format_option
@output_option
@timestamp_option
def hankel(model_file, fmt, output, timestamp):
    """Hankel singular values of the model."""
    config = RunConfig(
        command="hankel", model_path=Path(model_file),
        output_path=_resolve_output(output),
        flags={"format": fmt, "timestamp": timestamp},
    )
    _execute(config, fmt)


@main.command()
@click.argument("model_file", type=click.Path(dir_okay=False))
@click.option("--order", type=click.IntRange(min=1), required=True,
              help="Number of states to freeze per candidate.")
@click.option("--horizon", type=click.IntRange(min=0), default=100, show_default=True)
@click.option("--grid", default=None, help="Extra horizons to rank at, comma-separated.")
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True,
              help="Worker threads for candidate evaluation.")
@mode_option
@innovation_option
@format_option
@output_option
@tol_option
@timestamp_option
def reduce(model_file, order, horizon, grid, jobs, mode, innovation, fmt, output, tol, timestamp):
    """Score every size-k freeze candidate and rank the reductions."""
    flags = {
        "mode": mode, "innovation": innovation, "format": fmt,
        "jobs": jobs, "tol": tol, "timestamp": timestamp,
    }
    g = _parse_grid(grid)
    if g is not None:
        flags["grid"] = g
    config = RunConfig(
        command="reduce", model_path=Path(model_file), horizon=horizon,
        order=order, output_path=_resolve_output(output), flags=flags,
    )
    _execute(config, fmt)


@main.command()
@click.argument("model_file", type=click.Path(dir_okay=False))
@click.option("--horizon", type=click.IntRange(min=0), default=200, show_default=True)
@click.option("--indexing", type=click.Choice(["direct", "stepped"]), default="direct",
              show_default=True, help="Whether the variance recursion applies before step 0.")
@format_option
@output_option
@timestamp_option
def crossing(model_file, horizon, indexing, fmt, output, timestamp):
    """Crossing analysis of the two frozen variants of a decoupled 2-state model."""
    config = RunConfig(
        command="crossing", model_path=Path(model_file), horizon=horizon,
        output_path=_resolve_output(output),
        flags={"indexing": indexing, "format": fmt, "timestamp": timestamp},
    )
    _execute(config, fmt)


@main.command()
@click.argument("model_file", type=click.Path(dir_okay=False))
@click.option("--order", type=click.IntRange(min=1), required=True)
@click.option("--horizon", type=click.IntRange(min=0), default=100, show_default=True)
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True)
@mode_option
@innovation_option
@format_option
@output_option
@tol_option
@timestamp_option
def compare(model_file, order, horizon, jobs, mode, innovation, fmt, output, tol, timestamp):
    """Side-by-side horizon-n and asymptotic rankings of freeze candidates."""
    config = RunConfig(
        command="compare", model_path=Path(model_file), horizon=horizon,
        order=order, output_path=_resolve_output(output),
        flags={
            "mode": mode, "innovation": innovation, "format": fmt,
            "jobs": jobs, "tol": tol, "timestamp": timestamp,
        },
    )
    _execute(config, fmt)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service (same analyses as the subcommands)."""
    import uvicorn

    uvicorn.run("itmor.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
