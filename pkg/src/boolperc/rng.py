"""Seeded, stream-split randomness for reproducible experiments.

Every consumer draws from a (master seed, stream id) pair; identical pairs
give identical sequences and distinct streams are statistically
independent.  Stream ids for derived work units come from `hash64`, a
fixed, documented hash (blake2b-8 over little-endian 64-bit words) so runs
are portable across machines and implementations.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

_MASK = (1 << 64) - 1


def hash64(*parts) -> int:
    """Fixed 64-bit hash of a tuple of integers.

    blake2b with an 8-byte digest over the little-endian 8-byte encodings
    of the inputs (each reduced mod 2^64).
    """
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(int(p & _MASK).to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


@dataclass
class SeededRng:
    """A named stream of a master-seeded PCG64 generator."""

    seed: int
    stream: int = 0
    _gen: np.random.Generator | None = field(default=None, repr=False,
                                             compare=False)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(entropy=self.seed & _MASK,
                                        spawn_key=(self.stream & _MASK,))
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def substream(self, *keys) -> "SeededRng":
        """Independent child stream addressed by integer keys."""
        return SeededRng(self.seed, hash64(self.stream, *keys))

    def random(self, size=None):
        return self.generator.random(size)

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def uniform(self, low, high, size=None):
        return self.generator.uniform(low, high, size)

    def poisson(self, lam):
        return int(self.generator.poisson(lam))

    def integers(self, low, high, size=None):
        return self.generator.integers(low, high, size=size)
