"""Seeded random number generation.

Every stochastic component draws from a :class:`RandomSource`, a thin wrapper
around ``numpy.random.Generator`` with the PCG64 bit generator. Identical seeds
give identical streams on one build of the package; independent substreams are
derived by spawning children keyed on integers or strings, via
``numpy.random.SeedSequence`` so child streams never overlap.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["RandomSource", "sample_standard_normal"]


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key)
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf8"))
    raise TypeError(f"stream key must be int or str, got {type(key).__name__}")


class RandomSource:
    """PCG64-backed generator with deterministic child streams."""

    __slots__ = ("seed_entropy", "generator")

    def __init__(self, seed, _entropy: tuple | None = None):
        if _entropy is None:
            if not isinstance(seed, (int, np.integer)) or seed < 0:
                raise ValueError("seed must be a non-negative integer")
            _entropy = (int(seed),)
        self.seed_entropy = _entropy
        self.generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(_entropy)))

    def child(self, *keys) -> "RandomSource":
        """Independent substream identified by `keys` (ints or strings)."""
        if not keys:
            raise ValueError("child() needs at least one key")
        entropy = self.seed_entropy + tuple(_key_to_int(k) for k in keys)
        return RandomSource(None, _entropy=entropy)

    # Thin pass-throughs; all sampling goes through these so call sites stay greppable.

    def standard_normal(self, shape) -> np.ndarray:
        return self.generator.standard_normal(shape)

    def uniform(self, low, high, shape=None) -> np.ndarray:
        return self.generator.uniform(low, high, shape)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def integers(self, low, high, shape=None):
        return self.generator.integers(low, high, shape)

    def choice(self, n: int, size: int, p: np.ndarray | None = None, replace: bool = True):
        return self.generator.choice(n, size=size, p=p, replace=replace)


def sample_standard_normal(rng: RandomSource, shape) -> np.ndarray:
    """Standard normal draws of the given shape; all entries must be positive."""
    shape = (shape,) if isinstance(shape, (int, np.integer)) else tuple(shape)
    if len(shape) == 0 or any(int(s) <= 0 for s in shape):
        raise ValueError(f"shape must have positive entries, got {shape}")
    return rng.standard_normal(shape)
