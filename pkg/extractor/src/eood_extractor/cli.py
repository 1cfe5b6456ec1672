"""Command-line entry point for feature extraction."""

from __future__ import annotations

import sys

import click

from .extract import extract, extract_with_jigsaw
from .plans import builtin_plan_names, load_plan


@click.command()
@click.option("--model", "plan_name", required=True,
              help=f"Builtin plan ({', '.join(builtin_plan_names())}) or a plan JSON path.")
@click.option("--images", "image_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--taps", default=None,
              help="Comma-separated module paths overriding the plan's block taps.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--jigsaw-grid", default=None, type=int,
              help="Also extract jigsaw twins (pseudo-OOD) with this grid side.")
@click.option("--seed", default=0, type=int)
@click.option("--logits/--no-logits", default=False)
@click.option("--split", default="test_id",
              type=click.Choice(["id_calib", "test_id", "test_ood"]),
              help="Split tag for plain extraction (ignored with --jigsaw-grid).")
@click.option("--batch-size", default=None, type=int)
@click.option("--limit", default=None, type=int, help="Extract at most this many images.")
@click.option("--pretrained/--random-init", default=True)
def main(plan_name, image_dir, taps, out_dir, jigsaw_grid, seed, logits, split,
         batch_size, limit, pretrained):
    """Dump per-block feature maps in the engine's manifest + dump formats."""
    try:
        plan = load_plan(plan_name)
        if taps:
            plan = plan.with_overrides(block_taps=tuple(t.strip() for t in taps.split(",")))
        if batch_size:
            plan = plan.with_overrides(batch_size=batch_size)
        if jigsaw_grid is not None:
            if jigsaw_grid < 1:
                raise ValueError("--jigsaw-grid must be >= 1")
            manifest = extract_with_jigsaw(
                image_dir, plan, jigsaw_grid, seed, out_dir,
                logits=logits, pretrained=pretrained, limit=limit,
            )
        else:
            manifest = extract(
                image_dir, plan, out_dir, split=split, seed=seed,
                logits=logits, pretrained=pretrained, limit=limit,
            )
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {manifest}")


if __name__ == "__main__":
    main()
