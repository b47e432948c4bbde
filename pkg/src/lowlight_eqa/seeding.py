"""Stable, platform-independent seed derivation.

Python's built-in ``hash`` is salted per process, so every seed here goes
through BLAKE2b over a canonical byte encoding of its parts.
"""

from __future__ import annotations

import hashlib
from typing import Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")


def stable_hash64(*parts: object) -> int:
    """64-bit unsigned hash of ``parts``; identical on every machine and run."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        encoded = repr(part).encode("utf-8")
        # length prefix keeps ("ab", "c") distinct from ("a", "bc")
        h.update(len(encoded).to_bytes(4, "little"))
        h.update(encoded)
    return int.from_bytes(h.digest(), "little")


def derive_seed(global_seed: int, *parts: object) -> int:
    return stable_hash64(int(global_seed), *parts)


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; the seed is routed through SeedSequence for good mixing."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def stable_uniform(*parts: object) -> float:
    """Deterministic pseudo-uniform draw in [0, 1) keyed by ``parts``."""
    return stable_hash64(*parts) / 2.0**64


def stable_choice(items: Sequence[T], *parts: object) -> T:
    if not items:
        raise ValueError("cannot choose from an empty sequence")
    return items[stable_hash64(*parts) % len(items)]


def stable_shuffle(items: Iterable[T], *parts: object) -> list[T]:
    """Order ``items`` by a keyed hash of each item (items must have distinct reprs)."""
    return sorted(items, key=lambda item: stable_hash64(*parts, item))
