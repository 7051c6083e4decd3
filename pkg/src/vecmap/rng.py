"""Counter-based SplitMix64 random streams.

Draw ``i`` (0-based) of a stream with key ``k`` is ``mix64(k + (i + 1) * GAMMA)``,
where ``mix64`` is the SplitMix64 finalizer. With ``k`` equal to a plain seed this
reproduces the sequential SplitMix64 generator, so the published SplitMix64 test
vectors apply (seed 0 -> 0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, ...).

Sub-streams are keyed by hashing names into the parent key, so no generator shares
state with another and every draw is addressable without replaying a sequence.
Floats take the top 53 bits; normals use Box-Muller on two fresh uniforms.
"""

from __future__ import annotations

import math

MASK64 = 0xFFFFFFFFFFFFFFFF
GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _tag(name) -> int:
    if isinstance(name, int):
        return name & MASK64
    h = 0xCBF29CE484222325  # FNV-1a over UTF-8
    for b in str(name).encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & MASK64
    return h


class CounterRNG:
    """A keyed stream with an explicit draw counter."""

    def __init__(self, seed: int, *path):
        key = seed & MASK64
        for name in path:
            key = mix64(key ^ mix64(_tag(name) + GAMMA))
        self.key = key
        self.counter = 0

    def child(self, *path) -> CounterRNG:
        return CounterRNG(self.key, *path)

    def next_u64(self) -> int:
        self.counter += 1
        return mix64(self.key + self.counter * GAMMA)

    def random(self) -> float:
        """Uniform in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def integers(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] (rejection sampling, no modulo bias)."""
        span = hi - lo + 1
        if span <= 0:
            raise ValueError("empty integer range")
        limit = (1 << 64) - ((1 << 64) % span)
        while True:
            r = self.next_u64()
            if r < limit:
                return lo + r % span

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        u1 = 1.0 - self.random()  # (0, 1]
        u2 = self.random()
        return mu + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def shuffle(self, items: list) -> list:
        out = list(items)
        for i in range(len(out) - 1, 0, -1):
            j = self.integers(0, i)
            out[i], out[j] = out[j], out[i]
        return out
