"""
Deterministic Random Streams for RSLab
64-bit splitmix generator, vectorized over numpy uint64 arithmetic
"""

import hashlib
from typing import Sequence, Tuple, Union

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, purpose: str) -> int:
    """Stable 64-bit child seed for (seed, purpose-string)"""
    digest = hashlib.blake2b(f"{int(seed) & _MASK64}:{purpose}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Counter-based splitmix64 stream

    Output k is mix(seed + (k + 1) * gamma), so a block of n draws is one
    vectorized expression and streams never depend on the platform RNG.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.counter = 0

    def next_u64(self, n: int) -> np.ndarray:
        ks = np.arange(self.counter + 1, self.counter + 1 + n, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + ks * _GAMMA
            return _mix(z)

    def random(self, shape: Union[int, Tuple[int, ...]] = ()) -> np.ndarray:
        """Uniform doubles in [0, 1)"""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
        return u.reshape(shape) if shape else u[0]

    def uniform(self, low: float, high: float, shape: Union[int, Tuple[int, ...]]) -> np.ndarray:
        return low + (high - low) * self.random(shape)

    def integers(self, low: int, high: int, size: int) -> np.ndarray:
        """Integers in [low, high), via multiply-shift to avoid modulo bias"""
        span = high - low
        if span <= 0:
            raise ValueError(f"empty range [{low}, {high})")
        u = self.random(size) if size else np.zeros(0)
        return (low + np.floor(np.atleast_1d(u) * span)).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        keys = self.next_u64(n)
        return np.argsort(keys, kind="stable")

    def choice(self, items: Sequence, size: int) -> list:
        idx = self.integers(0, len(items), size)
        return [items[i] for i in idx]
