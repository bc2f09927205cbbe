"""Interchange writer for question vectors.

The consumer package reads a JSON manifest next to a raw payload. The
manifest records the format name, version, vector dimension, row count,
storage dtype, model tag, extraction mode, the ordered variable names, the
payload file name, and the payload's SHA-256. The payload holds the vectors
as row-major little-endian float32, so its length is exactly
``count * dim * 4`` bytes. The manifest is serialized with sorted keys and
a fixed indent, which makes identical runs produce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .errors import ConfigError, CorruptVectorError

INTERCHANGE_FORMAT = "question-embeddings"
INTERCHANGE_VERSION = 1


def write_interchange(names, vectors, model_tag, extraction_mode, manifest_path):
    """Write vectors as manifest + payload; returns both paths.

    The payload lands next to the manifest under the same stem with a
    ``.bin`` extension. Vectors are stored at 32-bit precision whatever the
    compute dtype was.
    """
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2:
        raise ConfigError("vectors must form a 2-D matrix")
    names = [str(n) for n in names]
    if len(names) != vectors.shape[0]:
        raise ConfigError(f"{len(names)} names for {vectors.shape[0]} vector rows")
    if len(set(names)) != len(names):
        raise ConfigError("duplicate variable names in vector table")
    if not np.all(np.isfinite(vectors)):
        raise CorruptVectorError("model produced NaN or Inf vector components")
    parent = os.path.dirname(os.path.abspath(manifest_path))
    os.makedirs(parent, exist_ok=True)
    base, _ = os.path.splitext(manifest_path)
    payload_path = base + ".bin"
    data = vectors.tobytes()
    manifest = {
        "format": INTERCHANGE_FORMAT,
        "version": INTERCHANGE_VERSION,
        "dim": int(vectors.shape[1]),
        "count": int(vectors.shape[0]),
        "dtype": "float32-le",
        "model_tag": model_tag,
        "extraction_mode": extraction_mode,
        "names": names,
        "payload": os.path.basename(payload_path),
        "payload_sha256": hashlib.sha256(data).hexdigest(),
    }
    with open(payload_path, "wb") as fh:
        fh.write(data)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest_path, payload_path
