"""Deterministic, splittable seeding.

Every stochastic step takes an explicit integer seed. Sub-streams are derived
from ``(seed, tag, index, ...)`` through numpy's SeedSequence spawn keys, so
two runs with the same root seed draw exactly the same numbers regardless of
the order in which stages ask for them.
"""

import zlib
from typing import Union

import numpy as np

from .errors import DomainError

Tag = Union[str, int]

MASK64 = (1 << 64) - 1

PARTIES = ("alice", "bob")


def _tag_key(tag: Tag) -> int:
    if isinstance(tag, str):
        return zlib.crc32(tag.encode("utf-8"))
    if tag < 0:
        raise DomainError(f"seed tags must be non-negative, got {tag}")
    return int(tag)


def derive_seed(seed: int, *tags: Tag) -> int:
    """Derive a 64-bit child seed from a root seed and a tag path.

    Args:
        seed: Non-negative root seed
        *tags: Stage names and indices identifying the sub-stream

    Returns:
        A 64-bit unsigned integer
    """
    if seed < 0:
        raise DomainError(f"seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_tag_key(t) for t in tags))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int, *tags: Tag) -> np.random.Generator:
    """Build a numpy Generator for the sub-stream named by ``tags``."""
    return np.random.default_rng(derive_seed(seed, *tags))


def party_seed(seed: int, party: str, stage: str, index: int = 0) -> int:
    """Seed contribution one party announces for a shared-randomness stage."""
    if party not in PARTIES:
        raise DomainError(f"unknown party {party!r}")
    return derive_seed(seed, party, stage, index)


def shared_seed(seed: int, stage: str, index: int = 0) -> int:
    """Joint seed for a stage: XOR of both parties' contributions."""
    return party_seed(seed, "alice", stage, index) ^ party_seed(seed, "bob", stage, index)
