"""Command-line launcher for the embedder service."""
from __future__ import annotations

import sys

import click

from .service import MODES, EmbedderConfig, serve


@click.command()
@click.option("--mode", type=click.Choice(MODES), default="stub", show_default=True)
@click.option("--dim", type=int, default=512, show_default=True,
              help="Embedding dimensionality; must match the gallery being served.")
@click.option("--listen", default="127.0.0.1:8800", show_default=True, help="host:port to bind.")
@click.option("--model-name", default="openai/clip-vit-base-patch32", show_default=True,
              help="Pretrained encoder (model mode only).")
@click.option("--projection-head", type=click.Path(), default=None,
              help="Optional .npz MLP applied after the encoder (model mode only).")
def main(mode, dim, listen, model_name, projection_head) -> None:
    """Serve text/image embedding over HTTP."""
    host, _, port = listen.rpartition(":")
    if not host or not port.isdigit():
        raise click.UsageError(f"--listen must be host:port, got {listen!r}")
    try:
        config = EmbedderConfig(
            mode=mode,
            dim=dim,
            model_name=model_name,
            projection_head=projection_head,
            host=host,
            port=int(port),
        )
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    serve(config)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
