"""Deterministic seed derivation for per-trial random streams.

A master seed plus a sequence of labels (trial index, purpose strings)
is hashed down to a 64-bit stream seed via splitmix64. Both the pure
simulators (random.Random) and the compiled kernels (xoshiro256++) are
seeded through this one function, so a (master_seed, trial) pair names
the same stream everywhere, independent of scheduling or worker count.
"""

from __future__ import annotations

import hashlib

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def derive_seed(master: int, *labels) -> int:
    """Fold labels (ints or strings) into a 64-bit child seed."""
    x = splitmix64(master & MASK64)
    for label in labels:
        if isinstance(label, str):
            label = int.from_bytes(
                hashlib.sha256(label.encode("utf-8")).digest()[:8], "little")
        elif not isinstance(label, int):
            raise TypeError(f"label must be int or str, got {type(label)!r}")
        x = splitmix64(x ^ (label & MASK64))
    return x
