"""Question embedding extraction with pretrained language models.

Turns a table of survey questions into fixed-width vectors: each question is
wrapped in an instruction prompt, pushed through a frozen pretrained model in
inference mode, and reduced to the last prompt token's hidden state
(decoder-style models) or the pooled sentence output (encoder-style models).
The vectors are written as the manifest-plus-payload interchange files the
survey opinion pipeline loads. Nothing here fine-tunes weights or generates
text.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    CorruptVectorError,
    EmbedderError,
    EmptyQuestionError,
    EmptyQuestionSetError,
    ModeMismatchError,
    ModelLoadError,
    OutOfMemoryError,
    QuestionFileError,
)
from .extract import (
    EXTRACTION_MODES,
    ExtractionConfig,
    ExtractionResult,
    extract_question_embeddings,
    load_backbone,
)
from .interchange import write_interchange
from .prompt import PROMPT_INFIX, PROMPT_PREFIX, PROMPT_SUFFIX, build_prompt
from .questions import read_question_table

__all__ = [
    "__version__",
    "ConfigError",
    "CorruptVectorError",
    "EmbedderError",
    "EmptyQuestionError",
    "EmptyQuestionSetError",
    "ModeMismatchError",
    "ModelLoadError",
    "OutOfMemoryError",
    "QuestionFileError",
    "EXTRACTION_MODES",
    "ExtractionConfig",
    "ExtractionResult",
    "extract_question_embeddings",
    "load_backbone",
    "write_interchange",
    "PROMPT_INFIX",
    "PROMPT_PREFIX",
    "PROMPT_SUFFIX",
    "build_prompt",
    "read_question_table",
]
