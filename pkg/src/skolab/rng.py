"""Counter-based seeding.

Every random draw in the package comes from a generator keyed by
``(master seed, replica, component tag)``.  Streams never share state,
so a replica produces the same path whether it runs first, last, alone
or on another thread.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .errors import BadParameter

__all__ = ["Seed", "generator", "as_seed"]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Seed:
    master: int = 0
    replica: int = 0

    def __post_init__(self):
        if not isinstance(self.master, (int, np.integer)) or not 0 <= int(self.master) <= _MASK64:
            raise BadParameter("master seed must be an integer in [0, 2**64)")
        if not isinstance(self.replica, (int, np.integer)) or int(self.replica) < 0:
            raise BadParameter("replica index must be a nonnegative integer")

    def stream(self, component: str) -> np.random.Generator:
        return generator(self.master, self.replica, component)

    def with_replica(self, replica: int) -> "Seed":
        return Seed(self.master, replica)


def generator(master: int, replica: int, component: str) -> np.random.Generator:
    key = (int(replica), zlib.crc32(component.encode("utf-8")))
    ss = np.random.SeedSequence(int(master), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def as_seed(seed) -> Seed:
    if isinstance(seed, Seed):
        return seed
    if seed is None:
        return Seed(0)
    return Seed(int(seed))
