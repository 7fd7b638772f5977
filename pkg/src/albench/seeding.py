"""Deterministic sub-seed derivation.

Every stochastic operation gets its own seed derived from the master seed
plus a role tag (and repeat/cycle indices where applicable), so repeats are
reproducible and the RNG streams of different roles never overlap.
"""

from __future__ import annotations

import hashlib


def derive_seed(*parts: int | str) -> int:
    """Hash the parts into a 32-bit seed. Stable across runs and platforms."""
    key = ":".join(str(p) for p in parts)
    digest = hashlib.blake2s(key.encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "big")
