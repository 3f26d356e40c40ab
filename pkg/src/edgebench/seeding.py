"""Stable seed derivation for simulator and runner randomness.

Seeds are derived by hashing the identifying parts of a run (profile seed,
config fields, repeat index) so that repeats differ from each other while
whole campaigns reproduce bit-for-bit under the same top-level seed.
"""

from __future__ import annotations

import hashlib


def derive_seed(*parts) -> int:
    """Map an arbitrary tuple of hashable parts to a 32-bit seed."""
    digest = hashlib.sha256(repr(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")
