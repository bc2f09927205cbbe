"""Frozen question-embedding exchange.

Embedding extraction runs elsewhere (any model, any machine); this module
owns the prompt construction and the interchange files, so producer and
consumer only have to agree on bytes.

Interchange form: a JSON manifest recording dimension, row count, model tag,
extraction mode, and the ordered variable list, next to a raw little-endian
float32 row-major payload. A delimited-text fallback (``variable,v1,...,vD``)
covers hand-built fixtures. Vectors are stored at 32-bit precision and
widened to 64-bit for arithmetic on load.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    AlignmentError,
    ChecksumError,
    ConfigError,
    CorruptEmbeddingError,
    EmptyQuestionError,
    FormatError,
    VersionError,
)

logger = logging.getLogger(__name__)

MANIFEST_FORMAT = "question-embeddings"
MANIFEST_VERSION = 1
EXTRACTION_MODES = ("last-token", "pooled")


@dataclass(frozen=True)
class PromptTemplate:
    """Instruction-style wrapper applied to a question before embedding."""

    prefix: str
    infix: str
    suffix: str

    def render(self, question_text):
        if not question_text or not str(question_text).strip():
            raise EmptyQuestionError("cannot build a prompt for an empty question")
        return f"{self.prefix}{self.infix}{question_text}{self.suffix}"


DEFAULT_PROMPT = PromptTemplate(
    prefix=(
        "Below is an instruction that describes a task. "
        "Write a response that appropriately completes the request."
    ),
    infix="\n\n### Instruction:",
    suffix="\n\n### Response:",
)


def build_prompt(question_text, template=DEFAULT_PROMPT):
    return template.render(question_text)


class EmbeddingMatrix:
    """Dense matrix of question vectors plus provenance fields."""

    def __init__(self, vectors, names, model_tag="", extraction_mode="last-token"):
        vectors = np.asarray(vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise FormatError("embedding vectors must form a 2-D matrix")
        names = [str(n) for n in names]
        if len(names) != vectors.shape[0]:
            raise FormatError(
                f"{len(names)} names for {vectors.shape[0]} vector rows"
            )
        if len(set(names)) != len(names):
            raise FormatError("duplicate variable names in embedding matrix")
        if not np.all(np.isfinite(vectors)):
            raise CorruptEmbeddingError("embedding matrix contains NaN or Inf")
        self.vectors = vectors
        self.names = list(names)
        self.model_tag = model_tag
        self.extraction_mode = extraction_mode
        self._name_to_row = {n: i for i, n in enumerate(names)}

    @property
    def dim(self):
        return int(self.vectors.shape[1])

    @property
    def count(self):
        return int(self.vectors.shape[0])

    def row(self, name):
        return self.vectors[self._name_to_row[name]]

    def as_float64(self):
        return self.vectors.astype(np.float64)

    def aligned_to(self, variables):
        """Reorder rows to a variable list; extras dropped, gaps are an error."""
        missing = [v for v in variables if v not in self._name_to_row]
        if missing:
            raise AlignmentError(
                f"embedding file lacks vectors for {len(missing)} variables: "
                f"{missing[:8]}"
            )
        extra = sorted(set(self.names) - set(variables))
        if extra:
            logger.warning(
                "dropping %d embedding rows not present in the dataset (e.g. %s)",
                len(extra),
                extra[:5],
            )
        rows = np.stack([self.vectors[self._name_to_row[v]] for v in variables])
        return EmbeddingMatrix(
            rows, list(variables), self.model_tag, self.extraction_mode
        )


def export_vectors(matrix, manifest_path):
    """Write an EmbeddingMatrix as manifest + float32 payload."""
    base, _ = os.path.splitext(manifest_path)
    payload_path = base + ".bin"
    data = np.ascontiguousarray(matrix.vectors, dtype="<f4").tobytes()
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "dim": matrix.dim,
        "count": matrix.count,
        "dtype": "float32-le",
        "model_tag": matrix.model_tag,
        "extraction_mode": matrix.extraction_mode,
        "names": matrix.names,
        "payload": os.path.basename(payload_path),
        "payload_sha256": hashlib.sha256(data).hexdigest(),
    }
    with open(payload_path, "wb") as fh:
        fh.write(data)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _read_manifest_bundle(path):
    with open(path, encoding="utf-8") as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not a JSON manifest ({exc})") from None
    if manifest.get("format") != MANIFEST_FORMAT:
        raise FormatError(
            f"{path}: expected format {MANIFEST_FORMAT!r}, got "
            f"{manifest.get('format')!r}"
        )
    if manifest.get("version") != MANIFEST_VERSION:
        raise VersionError(
            f"{path}: unsupported embedding manifest version "
            f"{manifest.get('version')!r}"
        )
    for field in ("dim", "count", "names", "payload"):
        if field not in manifest:
            raise FormatError(f"{path}: manifest missing field {field!r}")
    payload_path = os.path.join(
        os.path.dirname(os.path.abspath(path)), manifest["payload"]
    )
    with open(payload_path, "rb") as fh:
        blob = fh.read()
    digest = manifest.get("payload_sha256")
    if digest and hashlib.sha256(blob).hexdigest() != digest:
        raise ChecksumError(f"{payload_path}: payload checksum mismatch")
    dim, count = int(manifest["dim"]), int(manifest["count"])
    expected = dim * count * 4
    if len(blob) != expected:
        raise FormatError(
            f"{payload_path}: payload holds {len(blob)} bytes, expected "
            f"{expected} for {count} x {dim} float32"
        )
    if len(manifest["names"]) != count:
        raise FormatError(f"{path}: {len(manifest['names'])} names for {count} rows")
    vectors = np.frombuffer(blob, dtype="<f4").reshape(count, dim)
    return EmbeddingMatrix(
        vectors.copy(),
        manifest["names"],
        model_tag=manifest.get("model_tag", ""),
        extraction_mode=manifest.get("extraction_mode", "last-token"),
    )


def _read_delimited(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "variable":
            raise FormatError(
                f"{path}: delimited embeddings need a header starting with "
                "'variable'"
            )
        dim = len(header) - 1
        if dim < 1:
            raise FormatError(f"{path}: no vector columns")
        names, rows = [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != dim + 1:
                raise FormatError(
                    f"{path} line {line_no}: expected {dim + 1} fields, got "
                    f"{len(row)}"
                )
            names.append(row[0])
            try:
                rows.append([float(x) for x in row[1:]])
            except ValueError:
                raise FormatError(
                    f"{path} line {line_no}: non-numeric vector component"
                ) from None
    if not names:
        raise FormatError(f"{path}: no embedding rows")
    vectors = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(vectors)):
        raise CorruptEmbeddingError(f"{path}: NaN or Inf vector components")
    return EmbeddingMatrix(vectors.astype(np.float32), names)


def load_embeddings(path, ds=None):
    """Load an embedding file, optionally aligned to a dataset's questions.

    JSON manifests and the delimited-text fallback are both accepted; the
    file's leading byte decides which parser runs. With ``ds`` given, the
    returned rows follow the dataset's dense question order.
    """
    with open(path, "rb") as fh:
        head = fh.read(1)
    if head == b"{":
        matrix = _read_manifest_bundle(path)
    else:
        matrix = _read_delimited(path)
    if ds is not None:
        matrix = matrix.aligned_to(ds.variables)
    return matrix


def embedding_array(embeddings):
    """Accept an EmbeddingMatrix or a bare array; return float64 rows."""
    if isinstance(embeddings, EmbeddingMatrix):
        return embeddings.as_float64()
    arr = np.asarray(embeddings, dtype=np.float64)
    if arr.ndim != 2:
        raise ConfigError("embeddings must be a 2-D matrix")
    return arr
