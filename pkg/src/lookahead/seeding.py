"""Stable seed derivation so every random stream reproduces across processes.

Built-in ``hash`` is salted per interpreter, so seeds are derived from a keyed
byte encoding instead. The same parts always map to the same 64-bit seed, on
any platform and in any worker process.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np


def derive_seed(*parts: int | float | str | bytes | bool) -> int:
    """Map a tuple of primitive parts to a deterministic 64-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        # bool check first: bool is a subclass of int
        if isinstance(part, bool):
            tag, payload = b"b", struct.pack(">?", part)
        elif isinstance(part, int):
            tag, payload = b"i", part.to_bytes(16, "big", signed=True)
        elif isinstance(part, float):
            tag, payload = b"f", struct.pack(">d", part)
        elif isinstance(part, str):
            tag, payload = b"s", part.encode("utf-8")
        elif isinstance(part, bytes):
            tag, payload = b"r", part
        else:
            raise TypeError(f"cannot derive a seed from {type(part).__name__}")
        h.update(tag)
        h.update(struct.pack(">I", len(payload)))
        h.update(payload)
    return int.from_bytes(h.digest(), "big")


def rng_from(*parts: int | float | str | bytes | bool) -> np.random.Generator:
    """A fresh generator seeded from ``derive_seed(*parts)``."""
    return np.random.default_rng(derive_seed(*parts))
