"""Counter-based splittable random number streams.

Every stochastic routine in the package draws from a Philox counter-based
generator whose 128-bit key encodes ``(seed, path)`` where ``path`` is a
tuple of small integers naming the consumer (replica block, estimator
stage, ...).  Streams with distinct paths are statistically independent
and can be opened in any order on any worker, which is what makes
parallel reductions deterministic.
"""

from __future__ import annotations

import numpy as np

__all__ = ["RngStreams", "BLOCK"]

# Replica block size used by the vectorised drivers.  One Philox stream is
# opened per block; merging block results in index order makes every
# estimate independent of worker scheduling.
BLOCK = 1 << 14

_MASK64 = (1 << 64) - 1


def _mix64(values) -> int:
    # splitmix64 finaliser folded over the path components
    h = 0x9E3779B97F4A7C15
    for v in values:
        h = (h + (int(v) & _MASK64)) & _MASK64
        h ^= h >> 30
        h = (h * 0xBF58476D1CE4E5B9) & _MASK64
        h ^= h >> 27
        h = (h * 0x94D049BB133111EB) & _MASK64
        h ^= h >> 31
    return h


class RngStreams:
    """Factory of independent generators derived from one experiment seed."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        self.seed = int(seed) & _MASK64

    def stream(self, *path: int) -> np.random.Generator:
        """Open the generator identified by ``(seed, *path)``."""
        key = np.array([self.seed, _mix64(path)], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def substreams(self, *prefix: int):
        """A child factory whose paths are implicitly prefixed."""
        return _PrefixedStreams(self, prefix)

    def __repr__(self):
        return f"RngStreams(seed={self.seed})"


class _PrefixedStreams:
    def __init__(self, root: RngStreams, prefix):
        self._root = root
        self._prefix = tuple(prefix)

    def stream(self, *path: int) -> np.random.Generator:
        return self._root.stream(*self._prefix, *path)

    def substreams(self, *prefix: int):
        return _PrefixedStreams(self._root, self._prefix + tuple(prefix))


def as_streams(rng) -> RngStreams:
    """Accept either a seed or an ``RngStreams`` and return streams."""
    if isinstance(rng, (RngStreams, _PrefixedStreams)):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStreams(int(rng))
    raise TypeError(f"expected an integer seed or RngStreams, got {type(rng).__name__}")
