"""Deterministic random streams.

Every stream is a numpy ``Generator`` over the PCG64 bit generator, seeded
through ``numpy.random.SeedSequence``.  PCG64 streams are stable across
platforms and numpy releases, and ``SeedSequence.spawn`` gives independent
child streams, which is how the trainer splits one root seed into
per-purpose substreams (init / view1 / view2 / retain-delete / split).
"""

from __future__ import annotations

import numpy as np


class Rng:
    """A splittable deterministic random stream."""

    def __init__(self, seed: int | np.random.SeedSequence):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            self._seq = np.random.SeedSequence(int(seed))
        self._gen = np.random.Generator(np.random.PCG64(self._seq))

    def split(self, n: int) -> list["Rng"]:
        """Spawn ``n`` independent child streams (consumes no draws)."""
        return [Rng(child) for child in self._seq.spawn(n)]

    def bernoulli(self, p: float, size=None) -> np.ndarray:
        """Boolean draws, True with probability ``p`` (p=0 never, p=1 always)."""
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"bernoulli p must be in [0,1], got {p}")
        return self._gen.random(size) < p

    def gaussian(self, size=None) -> np.ndarray:
        return self._gen.standard_normal(size)

    def uniform(self, size=None) -> np.ndarray:
        return self._gen.random(size)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size=size)

    def shuffle(self, a: np.ndarray) -> None:
        """In-place Fisher-Yates shuffle along the first axis."""
        self._gen.shuffle(a)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def rng_new(seed: int) -> Rng:
    return Rng(seed)
