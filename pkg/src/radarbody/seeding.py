"""Deterministic, counter-style random streams.

All randomness in the repo (weight init, dropout masks, crop sampling,
simulator noise, epoch shuffles) flows through ``seeded_rng``, keyed by a
tuple such as ``(global_seed, "dropout", layer_id, step)``.  Streams are
independent of call order and replayable, which is what makes checkpoint
resume and the determinism tests bitwise-exact.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_key(*parts: int | str) -> int:
    """Collapse a mixed tuple of ints/strings into a stable 128-bit integer."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, (int, np.integer)):
            value = int(part)
            raw = value.to_bytes((value.bit_length() // 8) + 1, "little", signed=True)
            h.update(b"i" + len(raw).to_bytes(4, "little") + raw)
        elif isinstance(part, str):
            raw = part.encode("utf-8")
            h.update(b"s" + len(raw).to_bytes(4, "little") + raw)
        else:
            raise TypeError(f"seed parts must be int or str, got {type(part)!r}")
    return int.from_bytes(h.digest()[:16], "little")


def seeded_rng(*parts: int | str) -> np.random.Generator:
    """Philox generator keyed by ``parts``; same parts, same stream, always."""
    return np.random.Generator(np.random.Philox(key=derive_key(*parts)))
