"""Error types raised by the embedding extractor.

Everything the command line surfaces derives from ``EmbedderError``, so the
entry point can print one consistent line and exit nonzero instead of
dumping a traceback at the user.
"""

from __future__ import annotations


class EmbedderError(Exception):
    """Base class for every extractor failure."""


class ConfigError(EmbedderError):
    """A setting is out of range or internally inconsistent."""


class ModelLoadError(EmbedderError):
    """The model or its tokenizer could not be loaded."""


class ModeMismatchError(EmbedderError):
    """The requested extraction mode does not suit the model architecture."""


class QuestionFileError(EmbedderError):
    """The question table is malformed."""


class EmptyQuestionError(EmbedderError):
    """A question row carries no text to embed."""


class EmptyQuestionSetError(EmbedderError):
    """No questions were left after reading the table."""


class OutOfMemoryError(EmbedderError):
    """A forward pass did not fit in memory."""


class CorruptVectorError(EmbedderError):
    """The model produced NaN or Inf vector components."""
