"""Command line entry point.

One command: read a question table, embed every question with a pretrained
language model, and write the manifest-plus-payload interchange files the
consumer package loads. Transformers progress bars and info chatter are
silenced so the output stays one line per fact.
"""

from __future__ import annotations

import functools
import os
import sys

import click

from . import __version__
from .errors import EmbedderError
from .extract import EXTRACTION_MODES, ExtractionConfig, extract_question_embeddings
from .questions import read_question_table


def _quiet_transformers():
    from transformers.utils import logging as hf_logging

    hf_logging.set_verbosity_error()
    hf_logging.disable_progress_bar()


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except EmbedderError as exc:
            click.echo(f"error ({type(exc).__name__}): {exc}", err=True)
            sys.exit(1)
        except FileNotFoundError as exc:
            click.echo(f"error (FileNotFoundError): {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.command()
@click.version_option(version=__version__)
@click.option("--model", required=True, help="Model directory or hub identifier.")
@click.option(
    "--mode",
    type=click.Choice(EXTRACTION_MODES),
    default="last-token",
    show_default=True,
    help="last-token for decoder-style models, pooled for encoder-style.",
)
@click.option(
    "--questions",
    "questions_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="CSV with variable and question columns.",
)
@click.option(
    "--out",
    "out_path",
    required=True,
    type=click.Path(dir_okay=False),
    help="Manifest path; the float32 payload lands next to it.",
)
@click.option("--batch-size", type=int, default=8, show_default=True)
@click.option(
    "--device",
    default="cpu",
    show_default=True,
    help="Torch device for the forward passes.",
)
@handle_errors
def main(model, mode, questions_path, out_path, batch_size, device):
    """Embed survey questions with a pretrained language model."""
    _quiet_transformers()
    questions = read_question_table(questions_path)
    cfg = ExtractionConfig(
        model=model,
        mode=mode,
        device=device,
        batch_size=batch_size,
        out_path=out_path,
    )
    result = extract_question_embeddings(questions, cfg)
    click.echo(
        f"embedded {result.count} questions at dim {result.dim} "
        f"(mode {mode}, model {model})"
    )
    click.echo(
        f"wrote {result.manifest_path} + {os.path.basename(result.payload_path)}"
    )
