"""Named-stream seed splitting.

Every consumer of randomness derives its own seed from the master seed and a
tuple of names, so results do not depend on evaluation order or on how work
is spread over processes.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, *names) -> int:
    """Deterministic 63-bit seed for the stream ``names`` under ``master``."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master)).encode())
    for name in names:
        h.update(b"\x1f")
        h.update(str(name).encode())
    return int.from_bytes(h.digest(), "little") & (2**63 - 1)


def stream(master: int, *names) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *names))
