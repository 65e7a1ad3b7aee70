"""Seedable random number generation with a fully documented algorithm.

The generator is xoshiro256** (Blackman & Vigna), a 256-bit shift-register
generator, seeded through SplitMix64.  Both algorithms are short enough to
re-implement exactly in any language, which keeps synthetic datasets and
trained models reproducible independent of the numerics library underneath.

Stream derivation: independent substreams (one per distance, one per tuner
configuration, ...) are obtained by folding 64-bit tokens into the base seed
with SplitMix64's output function, see :func:`derive_seed`.
"""

from __future__ import annotations

import math
import struct

_MASK64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15


def _splitmix64_output(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def splitmix64_stream(seed: int, count: int) -> list[int]:
    """First `count` outputs of SplitMix64 initialised with `seed`."""
    state = seed & _MASK64
    out = []
    for _ in range(count):
        state = (state + _SPLITMIX_GAMMA) & _MASK64
        out.append(_splitmix64_output(state))
    return out


def float_token(x: float) -> int:
    """The IEEE-754 bit pattern of `x` as an unsigned 64-bit token."""
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


def label_token(label: str) -> int:
    """FNV-1a hash of a text label, for naming derived streams."""
    h = 0xCBF29CE484222325
    for byte in label.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return h


def derive_seed(seed: int, *tokens: int) -> int:
    """Fold 64-bit tokens into `seed`, producing a decorrelated substream seed.

    Each token is XORed into the running value and diffused through the
    SplitMix64 output function, so nearby tokens (e.g. the bit patterns of
    close distances) still yield unrelated streams.
    """
    h = seed & _MASK64
    for t in tokens:
        h = _splitmix64_output((h ^ (t & _MASK64)) & _MASK64)
    return h


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** with SplitMix64 seeding.

    Scalar draws only; the hot Monte Carlo paths in the BER simulator use a
    vectorised generator instead (see `ber.py`).
    """

    def __init__(self, seed: int) -> None:
        s = splitmix64_stream(seed, 4)
        if not any(s):
            s[0] = 1  # the all-zero state is a fixed point
        self._s = s
        self._spare_normal: float | None = None

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform float64 in [0, 1), 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def normal(self) -> float:
        """Standard normal via the Box-Muller transform (pair cached)."""
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
            return z
        u1 = 1.0 - self.random()  # (0, 1]: keeps the log finite
        u2 = self.random()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare_normal = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def exponential(self, mean: float) -> float:
        if mean <= 0.0:
            raise ValueError(f"exponential mean must be positive, got {mean}")
        return -mean * math.log(1.0 - self.random())

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            items[i], items[j] = items[j], items[i]
