"""Deterministic derivation of independent random streams from one master seed.

Every stochastic component (noise realizations, block samplers, Langevin
baths) pulls its randomness from a stream derived here, so results are
reproducible and independent of execution schedule.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_stream", "derive_seed"]

_U64 = 1 << 64


def _encode_label(label) -> list[int]:
    """Map one label (int or str) to non-negative 64-bit words."""
    if isinstance(label, (bool, float)):
        raise TypeError(f"labels must be int or str, got {type(label).__name__}")
    if isinstance(label, (int, np.integer)):
        return [int(label) % _U64]
    if isinstance(label, str):
        digest = hashlib.blake2b(label.encode("utf-8"), digest_size=16).digest()
        return [
            int.from_bytes(digest[:8], "little"),
            int.from_bytes(digest[8:], "little"),
        ]
    raise TypeError(f"labels must be int or str, got {type(label).__name__}")


def derive_seed(seed: int, *labels) -> np.random.SeedSequence:
    """Build the SeedSequence for (seed, labels) without constructing a generator."""
    words = [int(seed) % _U64]
    for label in labels:
        words.extend(_encode_label(label))
    return np.random.SeedSequence(words)


def derive_stream(seed: int, *labels) -> np.random.Generator:
    """Return a counter-based generator keyed by the master seed plus labels.

    Identical (seed, labels) always produce the identical stream; labels
    differing in any position give statistically independent streams.
    """
    return np.random.Generator(np.random.Philox(derive_seed(seed, *labels)))
