"""Command line: ``plotkit <kind> --in CSV [--in CSV ...] --out IMAGE``."""

from __future__ import annotations

import json
import sys

import click

from .figures import KINDS, FigureSpec, SchemaError, render


@click.command()
@click.argument("kind", type=click.Choice(list(KINDS)))
@click.option("--in", "inputs", type=click.Path(), multiple=True, required=True,
              help="input CSV (repeatable)")
@click.option("--out", "output", type=click.Path(), required=True, help="output image path")
@click.option("--window", type=int, default=10, show_default=True,
              help="moving-average window for convergence curves")
def main(kind, inputs, output, window):
    """Render simulator CSV outputs into a figure file."""
    try:
        spec = FigureSpec(kind=kind, inputs=list(inputs), output=output, window=window)
        path = render(spec)
    except (SchemaError, FileNotFoundError, ValueError) as exc:
        click.echo(json.dumps({"error": type(exc).__name__, "message": str(exc)}), err=True)
        sys.exit(1)
    click.echo(str(path))


if __name__ == "__main__":
    main()
