"""Versioned manifest + binary tensor bundle.

One bundle is a JSON manifest next to a single ``.bin`` payload. Tensors are
stored little-endian float32, row major, concatenated in manifest order, each
with its own SHA-256 checksum so corruption is caught tensor by tensor.
The manifest also carries a free-form ``extras`` dict for configuration and
index maps.
"""

import hashlib
import json
import os

import numpy as np

from .errors import ChecksumError, FormatError, VersionError

BUNDLE_FORMAT = "tensor-bundle"
BUNDLE_VERSION = 1


def _payload_path(manifest_path):
    base, _ = os.path.splitext(manifest_path)
    return base + ".bin"


def save_bundle(manifest_path, tensors, extras=None):
    """Write named tensors (an ordered mapping) and extras to disk."""
    payload_path = _payload_path(manifest_path)
    entries = []
    offset = 0
    blobs = []
    for name, array in tensors.items():
        data = np.ascontiguousarray(array, dtype="<f4").tobytes()
        entries.append(
            {
                "name": name,
                "shape": list(np.asarray(array).shape),
                "dtype": "float32-le",
                "offset": offset,
                "nbytes": len(data),
                "sha256": hashlib.sha256(data).hexdigest(),
            }
        )
        blobs.append(data)
        offset += len(data)
    manifest = {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "payload": os.path.basename(payload_path),
        "tensors": entries,
        "extras": extras or {},
    }
    with open(payload_path, "wb") as fh:
        for blob in blobs:
            fh.write(blob)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_bundle(manifest_path):
    """Read a bundle back; returns (name -> float32 array, extras)."""
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: not a JSON manifest ({exc})") from None
    if manifest.get("format") != BUNDLE_FORMAT:
        raise FormatError(
            f"{manifest_path}: expected format {BUNDLE_FORMAT!r}, "
            f"got {manifest.get('format')!r}"
        )
    if manifest.get("version") != BUNDLE_VERSION:
        raise VersionError(
            f"{manifest_path}: unsupported bundle version {manifest.get('version')!r}"
        )
    payload_path = os.path.join(
        os.path.dirname(os.path.abspath(manifest_path)), manifest["payload"]
    )
    with open(payload_path, "rb") as fh:
        payload = fh.read()
    tensors = {}
    for entry in manifest["tensors"]:
        start, nbytes = entry["offset"], entry["nbytes"]
        blob = payload[start : start + nbytes]
        if len(blob) != nbytes:
            raise FormatError(
                f"{payload_path}: payload truncated for tensor {entry['name']!r}"
            )
        if hashlib.sha256(blob).hexdigest() != entry["sha256"]:
            raise ChecksumError(
                f"{payload_path}: checksum mismatch for tensor {entry['name']!r}"
            )
        arr = np.frombuffer(blob, dtype="<f4").reshape(entry["shape"])
        tensors[entry["name"]] = arr.copy()
    return tensors, manifest.get("extras", {})
