"""Bounded history buffer with strided selection by ego-position distance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

DEFAULT_CAPACITY = 20
DEFAULT_STRIDES = (1.0, 5.0, 10.0, 15.0)


@dataclass(frozen=True)
class MemoryEntry:
    frame: int
    position: tuple[float, float]
    payload: Any = None


@dataclass(frozen=True)
class MemoryBuffer:
    capacity: int = DEFAULT_CAPACITY
    entries: tuple[MemoryEntry, ...] = ()

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")

    def __len__(self):
        return len(self.entries)

    def push(self, frame: int, position, payload=None) -> MemoryBuffer:
        """A new buffer with the entry appended and the oldest evicted past capacity."""
        if self.entries and frame <= self.entries[-1].frame:
            raise ValueError(f"frame {frame} is not after the last stored frame {self.entries[-1].frame}")
        entry = MemoryEntry(int(frame), (float(position[0]), float(position[1])), payload)
        return MemoryBuffer(self.capacity, (self.entries + (entry,))[-self.capacity:])


def select_strided(buf: MemoryBuffer, current, strides=DEFAULT_STRIDES) -> list[MemoryEntry]:
    """Pick one entry per stride, farthest stride first, without repetition.

    Entries are ranked by distance to `current` (ties: more recent first); each stride
    takes the unchosen entry whose distance is closest to it. Buffers smaller than the
    stride list are returned whole. Output is ordered oldest frame first.
    """
    strides = list(strides)
    if any(b < a for a, b in zip(strides, strides[1:])):
        raise ValueError("strides must be sorted ascending")
    entries = list(buf.entries)
    if len(entries) <= len(strides):
        return sorted(entries, key=lambda e: e.frame)
    cx, cy = float(current[0]), float(current[1])
    ranked = sorted(entries, key=lambda e: (math.hypot(e.position[0] - cx, e.position[1] - cy), -e.frame))
    dist = [math.hypot(e.position[0] - cx, e.position[1] - cy) for e in ranked]
    chosen: list[int] = []
    for s in reversed(strides):
        best = min((k for k in range(len(ranked)) if k not in chosen), key=lambda k: (abs(dist[k] - s), k))
        chosen.append(best)
    return sorted((ranked[k] for k in chosen), key=lambda e: e.frame)
