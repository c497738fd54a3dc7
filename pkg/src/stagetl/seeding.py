"""Deterministic per-purpose random streams derived from one base seed.

One experiment seed governs everything (splits, init, dropout, augmentation,
synthesis). Each consumer asks for a named child stream; the child seed is
the first 8 bytes of ``blake2b("<base>/<label>/<label>/...")``, so streams
are independent of each other and stable across platforms and releases.
"""

from __future__ import annotations

import hashlib

import numpy as np


def child_seed(base: int, *labels: object) -> int:
    """Stable 64-bit seed for the stream named by ``labels`` under ``base``."""
    tag = "/".join([str(int(base))] + [str(lab) for lab in labels])
    digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(base: int, *labels: object) -> np.random.Generator:
    """A fresh PCG64 generator for the named child stream."""
    return np.random.default_rng(child_seed(base, *labels))
