"""Command-line entry point for the mask adapter."""

from __future__ import annotations

import sys

import click

from .errors import AdapterError, MissingRun, ModelError


@click.command()
@click.option("--frames", required=True, type=click.Path(exists=True, file_okay=False),
              help="directory of RGB frames (<frame_id>.rgb.png)")
@click.option("--prompts", required=True, type=click.Path(exists=True, file_okay=False),
              help="directory of exported <frame_id>.prompts.json files")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--model", default="mock", show_default=True,
              help="promptable segmenter to drive (mock | flood)")
@click.option("--resolution", default=None,
              help="working resolution as WIDTHxHEIGHT, e.g. 320x240")
def main(frames, prompts, out, model, resolution):
    """Run a promptable segmentation model over exported pixel prompts and
    write per-frame mask archives in the fusion pipeline's format."""
    res = None
    if resolution:
        try:
            w, h = resolution.lower().split("x")
            res = (int(w), int(h))
        except ValueError:
            click.echo(f"error: bad --resolution {resolution!r}, expected WIDTHxHEIGHT", err=True)
            sys.exit(2)
    from .runner import run_adapter

    try:
        summary = run_adapter(frames, prompts, out, model, res)
    except ModelError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(4)
    except MissingRun as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(3)
    except AdapterError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    click.echo(f"{summary['records']} masks from {summary['prompts']} prompts "
               f"across {summary['frames']} frames ({summary['dropped']} dropped) -> {out}")


if __name__ == "__main__":
    main()
