"""CLI: embed-provider export --images DIR --backbone NAME --out FILE"""
from __future__ import annotations

import sys

import click

from .backbones import REGISTRY
from .export import ProviderConfig, export_embeddings


@click.group()
def cli():
    """Export mean-pooled vision-backbone embeddings as interchange files."""


@cli.command()
@click.option("--images", "image_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--backbone", required=True, type=click.Choice(sorted(REGISTRY)))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--device", default="cpu", show_default=True, help="cpu, cuda, or auto.")
@click.option("--batch-size", default=8, show_default=True, type=int)
@click.option("--label", default="ai", show_default=True, type=click.Choice(["ai", "human"]))
@click.option("--namespace", default="train", show_default=True)
@click.option("--random-init", is_flag=True,
              help="Seeded random weights at the published architecture (offline testing).")
@click.option("--seed", default=None, type=int, help="Weight seed for --random-init.")
def export(image_dir, backbone, out_path, device, batch_size, label, namespace, random_init, seed):
    """Embed an image directory into one interchange file plus sidecar."""
    config = ProviderConfig(
        backbone=backbone,
        device=device,
        batch_size=batch_size,
        pretrained=not random_init,
        seed=seed,
        label=label,
        namespace=namespace,
    )
    count = export_embeddings(image_dir, config, out_path)
    click.echo(f"exported {count} embeddings (dim {REGISTRY[backbone].dim}) to {out_path}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as e:
        e.show()
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except (ValueError, RuntimeError) as e:
        click.echo(f"error: {e}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
