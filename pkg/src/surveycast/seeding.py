"""Deterministic random-stream derivation.

All stochastic steps in the package (fold assignment, shuffling, dropout,
initialization, simulation) draw from generators produced here, so a single
run seed reproduces every downstream draw. A sub-stream is addressed by the
run seed plus a tuple of string labels; the labels are hashed with SHA-256 so
the derivation does not depend on Python's per-process hash randomization.
"""

import hashlib

import numpy as np


def _label_entropy(label):
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def seed_sequence_for(seed, *labels):
    entropy = [int(seed)] + [_label_entropy(label) for label in labels]
    return np.random.SeedSequence(entropy)


def rng_for(seed, *labels):
    """Return a PCG64 Generator for the sub-stream named by ``labels``."""
    return np.random.Generator(np.random.PCG64(seed_sequence_for(seed, *labels)))


def derive_seed(seed, *labels):
    """Collapse a sub-stream address to a single recordable integer seed."""
    return int(seed_sequence_for(seed, *labels).generate_state(1, np.uint64)[0])
