"""Portable deterministic random streams.

Everything in this package that needs randomness draws it from the
splitmix64 generator defined here, never from platform- or
version-dependent sources.  The generator is fully specified by the
constants below, so an independent reimplementation (in any language)
produces bit-identical streams:

* state update:   state <- (state + GOLDEN_GAMMA) mod 2**64
* output:         mix64(state), where mix64 is the splitmix64 finalizer
* doubles:        top 53 bits of the output, scaled by 2**-53
* bounded ints:   Lemire multiply-shift, (u * n) >> 64

Derived streams make order-independent parallel work possible: the
stream for index ``i`` under master seed ``s`` is seeded with
``mix64(mix64(s) + i * GOLDEN_GAMMA)``.  Consumers that evaluate indices
in any order, or in parallel, therefore produce identical results.

Scalar (pure Python int) and vectorized (numpy uint64) forms of each
primitive are both provided; they agree bit-for-bit.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MULT1 = 0xBF58476D1CE4E5B9
_MULT2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """splitmix64 output finalizer (Stafford mix 13)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MULT1) & MASK64
    z = ((z ^ (z >> 27)) * _MULT2) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Seed of the ``index``-th derived stream under ``master_seed``.

    The derivation is a pure function of (master_seed, index), so
    derived streams can be created in any order, on any number of
    workers, without changing their contents.
    """
    base = mix64(master_seed)
    return mix64((base + (index & MASK64) * GOLDEN_GAMMA) & MASK64)


class SplitMix64:
    """Scalar splitmix64 stream."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)

    def next_double(self) -> float:
        """Uniform double in [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) * 2.0**-53

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) via the Lemire multiply-shift map."""
        if n <= 0:
            raise ValueError("randbelow requires n >= 1")
        return (self.next_u64() * n) >> 64

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle driven by this stream."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]


# ---------------------------------------------------------------------------
# Vectorized forms.  numpy uint64 arithmetic wraps modulo 2**64, which is
# exactly the arithmetic the scalar forms perform on masked Python ints.
# ---------------------------------------------------------------------------

_G = np.uint64(GOLDEN_GAMMA)
_M1 = np.uint64(_MULT1)
_M2 = np.uint64(_MULT2)


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized mix64 over a uint64 array."""
    z = z.astype(np.uint64, copy=True)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def derive_seed_array(master_seed: int, indices: np.ndarray) -> np.ndarray:
    """Vectorized ``derive_seed`` for an array of stream indices."""
    base = np.uint64(mix64(master_seed))
    idx = indices.astype(np.uint64)
    return mix64_array(base + idx * _G)


def u64_block(seed: int, count: int) -> np.ndarray:
    """First ``count`` outputs of the stream seeded with ``seed``."""
    states = np.uint64(seed & MASK64) + np.arange(1, count + 1, dtype=np.uint64) * _G
    return mix64_array(states)


def double_block(seed: int, count: int) -> np.ndarray:
    """First ``count`` doubles of the stream seeded with ``seed``."""
    return (u64_block(seed, count) >> np.uint64(11)) * 2.0**-53


def randbelow_array(u: np.ndarray, n: int) -> np.ndarray:
    """Lemire bounded integers from raw uint64 draws, for n < 2**32.

    Splits the 128-bit product (u * n) >> 64 into 64-bit pieces so the
    result matches the scalar arbitrary-precision computation exactly.
    """
    if not 0 < n < 2**32:
        raise ValueError("randbelow_array requires 0 < n < 2**32")
    nn = np.uint64(n)
    hi = u >> np.uint64(32)
    lo = u & np.uint64(0xFFFFFFFF)
    return ((hi * nn + ((lo * nn) >> np.uint64(32))) >> np.uint64(32)).astype(np.int64)
