"""Deterministic, splittable random streams.

Every random draw in the package comes from a generator built from a
:class:`StreamKey` ``(root, lane, index)``.  The key is hashed into a numpy
``SeedSequence`` spawn key, so distinct ``(lane, index)`` pairs give
statistically independent PCG64 streams and the same key always reproduces the
same numbers, whatever the worker layout.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1


def lane_id(lane: str) -> int:
    return zlib.crc32(lane.encode("utf-8"))


@dataclass(frozen=True)
class StreamKey:
    root: int
    lane: str
    index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.root) <= MASK64:
            raise ValueError("root seed must fit in 64 bits")
        if self.index < 0:
            raise ValueError("path index must be nonnegative")

    def seed_sequence(self, *sub: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(int(self.root), spawn_key=(lane_id(self.lane), int(self.index), *map(int, sub)))

    def rng(self, *sub: int) -> np.random.Generator:
        """Generator for this key; ``sub`` selects an independent child stream."""
        return np.random.Generator(np.random.PCG64(self.seed_sequence(*sub)))

    def child(self, lane: str) -> "StreamKey":
        """Key on a different lane with the same root and index."""
        return StreamKey(self.root, f"{self.lane}/{lane}", self.index)

    def at(self, index: int) -> "StreamKey":
        return StreamKey(self.root, self.lane, index)


def derive_seed(root: int, *labels) -> int:
    """Stable 64-bit seed derived from a root seed and labels (e.g. per-n seeds)."""
    words = [lane_id(str(x)) for x in labels]
    state = np.random.SeedSequence(int(root), spawn_key=tuple(words)).generate_state(2, np.uint64)
    return int(state[0])


def keys(root: int, lane: str, count: int, start: int = 0) -> list[StreamKey]:
    return [StreamKey(root, lane, i) for i in range(start, start + count)]
