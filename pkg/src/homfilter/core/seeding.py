"""Deterministic, splittable random streams.

Every random draw in the package comes from a :class:`SeedSpec`: a master
seed plus a stream path such as ``(replication, process)``. The path is
hashed together with the master seed into the 128-bit key of a Philox
counter-based generator, so two specs with equal fields produce
bit-identical draws no matter which thread or in which order they run.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .exceptions import ConfigurationError


class Process:
    """Process indices used as the last stream-path component"""

    V = 0
    W = 1
    B = 2
    J1 = 3
    J2 = 4
    J_LAMBDA = 5
    THINNING = 6
    PARTICLES = 7
    RESAMPLING = 8
    INITIAL = 9


MASK_64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus stream path identifying one independent stream"""

    master_seed: int
    stream_path: Tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.master_seed) <= MASK_64:
            raise ConfigurationError(
                f"Master seed must be an unsigned 64-bit integer, "
                f"got {self.master_seed}"
            )
        if any(int(i) < 0 for i in self.stream_path):
            raise ConfigurationError(
                f"Stream path components must be non-negative: "
                f"{self.stream_path}"
            )
        object.__setattr__(
            self, "stream_path", tuple(int(i) for i in self.stream_path)
        )

    def child(self, *indices: int) -> "SeedSpec":
        """Extend the stream path"""
        return SeedSpec(self.master_seed, self.stream_path + tuple(indices))

    def generator(self) -> np.random.Generator:
        """Build the Philox generator for this stream"""
        sequence = np.random.SeedSequence(
            entropy=int(self.master_seed), spawn_key=self.stream_path
        )
        key = sequence.generate_state(2, dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def replication_seed(master_seed: int, replication: int) -> SeedSpec:
    """Seed for one Monte Carlo replication"""
    return SeedSpec(master_seed, (replication,))


CACHE_STREAM = 1 << 32


def cache_seed(master_seed: int) -> SeedSpec:
    """Seed for drift-cache estimation, disjoint from replication streams"""
    return SeedSpec(master_seed, (CACHE_STREAM,))
