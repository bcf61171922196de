"""Seeded, portable random streams.

All randomness in this package flows through :class:`PortableRng`, a
counter-based stream built on the SplitMix64 output permutation.  For a seed
``s`` the i-th raw draw (i starting at 1) is::

    out_i = mix64((s + i * 0x9E3779B97F4A7C15) mod 2**64)

where ``mix64`` is::

    z ^= z >> 30;  z = (z * 0xBF58476D1CE4E5B9) mod 2**64
    z ^= z >> 27;  z = (z * 0x94D049BB133111EB) mod 2**64
    z ^= z >> 31

Uniform doubles take the top 53 bits, ``((out >> 11) + 1) * 2**-53``, which
lies in (0, 1]; normal deviates apply the Box-Muller transform to consecutive
uniform pairs (both outputs of each pair are used, in cos/sin order).  The
construction is plain integer and IEEE-754 double arithmetic, so a fixed seed
reproduces the same stream bit for bit on any platform.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = 0xFFFFFFFFFFFFFFFF


def mix64(value: int) -> int:
    """SplitMix64 output permutation on a plain Python integer."""
    z = value & _U64_MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64_MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64_MASK
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _MIX1
    z = z ^ (z >> np.uint64(27))
    z = z * _MIX2
    return z ^ (z >> np.uint64(31))


class PortableRng:
    """Deterministic counter-based random stream (see module docstring).

    The instance keeps a draw counter, so successive calls continue the same
    stream; two instances with the same seed replay identical values.
    """

    def __init__(self, seed: int, position: int = 0):
        self._seed = np.uint64(int(seed) & _U64_MASK)
        self._position = int(position)

    @property
    def position(self) -> int:
        return self._position

    def raw(self, count: int) -> np.ndarray:
        """Next ``count`` raw 64-bit outputs as a uint64 array."""
        if count < 0:
            raise ValueError("count must be non-negative")
        start = self._position + 1
        idx = np.arange(start, start + count, dtype=np.uint64)
        self._position += count
        return _mix64_array(self._seed + idx * _GOLDEN)

    def uniforms(self, count: int) -> np.ndarray:
        """Doubles in (0, 1], one per raw draw."""
        bits = (self.raw(count) >> np.uint64(11)).astype(np.float64)
        return (bits + 1.0) * 2.0**-53

    def normals(self, count: int) -> np.ndarray:
        """Standard normal deviates via Box-Muller on uniform pairs."""
        if count < 0:
            raise ValueError("count must be non-negative")
        pairs = (count + 1) // 2
        u1 = self.uniforms(pairs)
        u2 = self.uniforms(pairs)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:count]

    def permutation(self, n: int) -> np.ndarray:
        """Uniform random permutation of range(n), via argsort of uniforms."""
        return np.argsort(self.uniforms(n), kind="stable")

    def spawn(self, key: int) -> "PortableRng":
        """Independent substream with a seed derived from (seed, key)."""
        derived = mix64(int(self._seed) ^ mix64(int(key) + 1))
        return PortableRng(derived)


def derive_seed(seed: int, key: int) -> int:
    """Deterministic per-key seed, used for per-round substreams."""
    return mix64((int(seed) & _U64_MASK) ^ mix64(int(key) + 1))
