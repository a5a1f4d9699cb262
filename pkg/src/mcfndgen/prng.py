"""Seedable, streamed pseudo-random number source (PCG32, XSH-RR variant).

Both generators draw every random quantity from this module so that a
(seed, stream) pair fully determines their output on any platform.  The
frozen constants below are the classic PCG32 ones: 64-bit LCG state with
multiplier 6364136223846793005, stream selected through the (always odd)
increment ``(stream << 1) | 1``, 32-bit XSH-RR output.  Golden output
vectors are pinned in the test suite; changing any constant is a
compatibility break.

Real numbers are built from a 53-bit mantissa (two 32-bit draws per
value), so sequences of reals are identical across platforms.  Integer
draws use rejection sampling and are exactly unbiased.

The ``*_array`` methods consume the stream exactly like the equivalent
loop of scalar calls and exist only to keep bulk sampling off the Python
interpreter's hot path.
"""

from __future__ import annotations

import math

import numpy as np

_MASK32 = 0xFFFFFFFF
_MASK64 = 0xFFFFFFFFFFFFFFFF
_MULTIPLIER = 6364136223846793005

DEFAULT_SEED = 42
DEFAULT_STREAM = 54

_INV_2_53 = 2.0**-53


class Pcg32:
    """PCG32 generator state for one (seed, stream) pair.

    A state is single-owner: concurrent users must create distinct
    streams.  Distinct streams share no output prefix.
    """

    __slots__ = ("seed", "stream", "_state", "_inc")

    def __init__(self, seed: int = DEFAULT_SEED, stream: int = DEFAULT_STREAM):
        if not 0 <= seed <= _MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if not 0 <= stream <= _MASK64:
            raise ValueError(f"stream must be a 64-bit unsigned integer, got {stream}")
        self.seed = seed
        self.stream = stream
        self._inc = ((stream << 1) | 1) & _MASK64
        self._state = 0
        self.next_u32()
        self._state = (self._state + seed) & _MASK64
        self.next_u32()

    def next_u32(self) -> int:
        """Advance one step and return a uniform 32-bit unsigned integer."""
        old = self._state
        self._state = (old * _MULTIPLIER + self._inc) & _MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & _MASK32
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & _MASK32

    def uniform_real(self, lo: float, hi: float) -> float:
        """Uniform real in [lo, hi); returns lo when lo == hi."""
        if lo > hi:
            raise ValueError(f"uniform_real requires lo <= hi, got [{lo}, {hi}]")
        if lo == hi:
            self.next_u32()
            self.next_u32()
            return lo
        a = self.next_u32()
        b = self.next_u32()
        frac = ((a >> 5) * 67108864 + (b >> 6)) * _INV_2_53
        value = lo + (hi - lo) * frac
        # frac < 1 mathematically; guard the rounding corner case
        return value if value < hi else math.nextafter(hi, lo)

    def uniform_int(self, lo: int, hi: int) -> int:
        """Unbiased uniform integer in [lo, hi] (rejection sampling)."""
        if lo > hi:
            raise ValueError(f"uniform_int requires lo <= hi, got [{lo}, {hi}]")
        if lo == hi:
            return lo
        span = hi - lo + 1
        threshold = (1 << 32) % span
        while True:
            u = self.next_u32()
            if u >= threshold:
                return lo + (u % span)

    # -- batched equivalents ------------------------------------------------

    def u32_array(self, count: int) -> np.ndarray:
        """The next ``count`` values of :meth:`next_u32` as a uint32 array."""
        if count <= 0:
            return np.empty(0, dtype=np.uint32)
        mult = np.uint64(_MULTIPLIER)
        # old_i = m^i * s0 + inc * sum_{j<i} m^j  (mod 2^64, wrapping uint64)
        powers = np.empty(count, dtype=np.uint64)
        powers[0] = 1
        if count > 1:
            powers[1:] = mult
            np.multiply.accumulate(powers, out=powers)
        geom = np.add.accumulate(powers) - powers  # sum of m^j for j < i
        old = powers * np.uint64(self._state) + geom * np.uint64(self._inc)
        self._state = int((int(old[-1]) * _MULTIPLIER + self._inc) & _MASK64)
        xorshifted = (((old >> np.uint64(18)) ^ old) >> np.uint64(27)).astype(np.uint32)
        rot = (old >> np.uint64(59)).astype(np.uint32)
        out = (xorshifted >> rot) | (xorshifted << ((np.uint32(32) - rot) & np.uint32(31)))
        return out

    def uniform_real_array(self, lo: float, hi: float, count: int) -> np.ndarray:
        """Batch equal to ``count`` scalar :meth:`uniform_real` calls."""
        if lo > hi:
            raise ValueError(f"uniform_real requires lo <= hi, got [{lo}, {hi}]")
        u = self.u32_array(2 * count).astype(np.uint64)
        if lo == hi:
            return np.full(count, lo, dtype=float)
        frac = ((u[0::2] >> np.uint64(5)) * np.uint64(67108864) + (u[1::2] >> np.uint64(6))).astype(float)
        values = lo + (hi - lo) * (frac * _INV_2_53)
        np.minimum(values, math.nextafter(hi, lo), out=values)
        return values

    def normal_array(self, count: int) -> np.ndarray:
        """Standard normals via Box-Muller; pairs consume four u32 each.

        An odd ``count`` still consumes a full final pair (the second
        value is discarded) so consumption is a function of count alone.
        """
        pairs = (count + 1) // 2
        u = self.u32_array(4 * pairs).astype(np.uint64)
        i53 = ((u[0::2] >> np.uint64(5)) * np.uint64(67108864) + (u[1::2] >> np.uint64(6))).astype(float)
        opens = (i53 + 0.5) * _INV_2_53  # strictly inside (0, 1)
        u1 = opens[0::2]
        u2 = opens[1::2]
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * math.pi * u2
        out = np.empty(2 * pairs, dtype=float)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:count]
