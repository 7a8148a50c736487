"""Named seed derivation so every sample in a batch is independently reproducible.

All randomness in the package flows from a single user seed through
``derived_rng``/``derived_seed`` with explicit string/integer keys (for
example ``("augment", "base", 17)``), never through global RNG state.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _material(parts) -> list[int]:
    out = []
    for part in parts:
        if isinstance(part, (int, np.integer)):
            out.append(int(part) & 0xFFFFFFFFFFFFFFFF)
        elif isinstance(part, str):
            digest = hashlib.sha256(part.encode("utf-8")).digest()
            out.append(int.from_bytes(digest[:8], "little"))
        else:
            raise TypeError(f"seed keys must be int or str, got {type(part).__name__}")
    return out


def derived_rng(seed: int, *keys) -> np.random.Generator:
    """Generator for the stream named by ``keys`` under the root ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(_material([seed, *keys])))


def derived_seed(seed: int, *keys) -> int:
    """64-bit integer seed for the stream named by ``keys``."""
    words = np.random.SeedSequence(_material([seed, *keys])).generate_state(2)
    return int(words[0]) | (int(words[1]) << 32)
