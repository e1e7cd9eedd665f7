"""Command-line entry point for the bridge server."""

from __future__ import annotations

import functools
import logging
import sys

import click

from .backends import BackendError, make_backend
from .server import Server


@click.command()
@click.option("--endpoint", default="127.0.0.1:8753", show_default=True,
              help="'host:port' or 'unix:/path' to listen on.")
@click.option("--no-model", is_flag=True,
              help="Serve the stateful echo backend (no weights needed).")
@click.option("--weights", type=click.Path(), default=None,
              help="TorchScript archive with encode/decode/eps methods.")
@click.option("--device", default="cpu", show_default=True,
              help="Device for model execution.")
@click.option("--sampler", default="ddim", show_default=True,
              type=click.Choice(["ddim", "ancestral"]),
              help="Latent update rule used by the model backend.")
@click.option("--verbose", is_flag=True, help="Log each session.")
def main(endpoint, no_model, weights, device, sampler, verbose):
    """Serve an external denoiser over the OSRD wire protocol."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING)
    if not no_model and weights is None:
        raise click.UsageError("either --weights or --no-model is required")
    factory = functools.partial(make_backend, no_model, weights, device, sampler)
    try:
        factory()  # fail fast on bad weights before binding
        server = Server(endpoint, factory)
    except (BackendError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"listening on {server.endpoint}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()


if __name__ == "__main__":
    main()
