"""Counter-based SplitMix64 random streams.

Every random draw in the package goes through :class:`Rng` so that a seed
fully determines generated data, splits, subsamples and weight inits.  The
construction is small enough to port bit-exactly to any language:

* draw ``i`` (0-based) of a stream with key ``k`` is ``mix64(k + (i + 1) * GOLDEN)``
  with all arithmetic modulo 2**64;
* a uniform double is ``(x >> 11) * 2**-53``, in ``[0, 1)``;
* a standard normal uses Box-Muller on two consecutive uniforms
  ``u1, u2``: ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`` (the sine branch is
  discarded so every normal consumes exactly two draws);
* child streams are keyed by ``mix64(key ^ mix64(tag * GOLDEN))``.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, applied elementwise to a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _mix_int(value: int) -> int:
    return int(mix64(np.array([value & MASK64], dtype=np.uint64))[0])


class Rng:
    """A seeded stream of 64-bit words with a moving counter."""

    def __init__(self, seed: int, counter: int = 0):
        self.key = int(seed) & MASK64
        self.counter = int(counter)

    def child(self, tag: int) -> "Rng":
        """Independent stream derived from this stream's key and an integer tag."""
        return Rng(_mix_int(self.key ^ _mix_int((int(tag) * GOLDEN) & MASK64)))

    def words(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.key) + idx * np.uint64(GOLDEN)
            return mix64(z)

    def uniform(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        u = (self.words(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        if low == 0.0 and high == 1.0:
            return u
        return low + (high - low) * u

    def normal(self, n: int, mean=0.0, std=1.0) -> np.ndarray:
        u = self.uniform(2 * n).reshape(n, 2)
        z = np.sqrt(-2.0 * np.log1p(-u[:, 0])) * np.cos(2.0 * np.pi * u[:, 1])
        return mean + std * z

    def integers(self, n: int, high: int) -> np.ndarray:
        """Integers in ``[0, high)`` as ``floor(u * high)``."""
        return np.minimum((self.uniform(n) * high).astype(np.int64), high - 1)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.words(n), kind="stable")

    def choice(self, n: int, size: int) -> np.ndarray:
        """``size`` distinct indices from ``range(n)``, in draw order."""
        return self.permutation(n)[:size]

    def categorical(self, n: int, weights) -> np.ndarray:
        w = np.asarray(weights, dtype=np.float64)
        cdf = np.cumsum(w / w.sum())
        cdf[-1] = 1.0
        return np.searchsorted(cdf, self.uniform(n), side="right")
