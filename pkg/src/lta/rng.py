"""Counter-based deterministic random number generation.

Every random draw in this package flows through :class:`RandomStream`, a
splittable counter-based generator. The algorithm is fixed and documented here
so that run artifacts are reproducible across platforms and can be re-derived
by an independent implementation:

* ``mix64(x)`` is the SplitMix64 finalizer (Steele et al.):
  ``z = x + 0x9E3779B97F4A7C15``, then two xor-shift-multiply rounds with the
  constants ``0xBF58476D1CE4E5B9`` and ``0x94D049BB133111EB``, and a final
  ``z ^= z >> 31``. All arithmetic is modulo 2**64.
* A stream is identified by a 64-bit ``key``. The i-th raw output of the
  stream is ``mix64(key + (i + 1) * 0x9E3779B97F4A7C15)``, i.e. random access
  by counter.
* Uniform doubles in [0, 1) take the top 53 bits of the raw output divided by
  2**53. Normals use the Box-Muller transform on consecutive uniform pairs
  (the first uniform of a pair is nudged away from 0 to keep log finite).
* Substreams are derived by name and index:
  ``key' = mix64(key ^ fnv1a64(name)) + mix64(index)`` (mod 2**64), where
  ``fnv1a64`` is the 64-bit FNV-1a hash of the UTF-8 bytes of ``name``.
  Derivation never consumes draws from the parent, so adding stages or images
  to a run cannot perturb existing streams.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

_FNV_OFFSET = np.uint64(0xCBF29CE484222325)
_FNV_PRIME = np.uint64(0x100000001B3)


def _mix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, vectorized over uint64 arrays (wraps mod 2**64)."""
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def fnv1a64(name: str) -> int:
    """64-bit FNV-1a hash of the UTF-8 encoding of ``name``."""
    h = int(_FNV_OFFSET)
    for byte in name.encode("utf-8"):
        h = ((h ^ byte) * int(_FNV_PRIME)) & 0xFFFFFFFFFFFFFFFF
    return h


class RandomStream:
    """A named, counter-based random stream with O(1) substream derivation."""

    def __init__(self, key: int):
        self.key = np.uint64(key & 0xFFFFFFFFFFFFFFFF)
        self.counter = np.uint64(0)

    @classmethod
    def from_seed(cls, seed: int) -> "RandomStream":
        """Root stream for a run; the root key is mix64(seed)."""
        return cls(int(_mix64(np.uint64(np.uint64(seed) & np.uint64(0xFFFFFFFFFFFFFFFF)))))

    def substream(self, name: str, index: int = 0) -> "RandomStream":
        """Derive an independent stream; does not consume from this one."""
        base = int(_mix64(self.key ^ np.uint64(fnv1a64(name))))
        idx = int(_mix64(np.uint64(index & 0xFFFFFFFFFFFFFFFF)))
        return RandomStream((base + idx) & 0xFFFFFFFFFFFFFFFF)

    def _raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw uint64 outputs, advancing the counter."""
        with np.errstate(over="ignore"):
            idx = np.arange(1, n + 1, dtype=np.uint64) + self.counter
            self.counter = self.counter + np.uint64(n)
            return _mix64(self.key + idx * _GOLDEN)

    def uniform(self, n: int | None = None, low: float = 0.0, high: float = 1.0):
        """Uniform floats in [low, high); scalar when ``n`` is None."""
        scalar = n is None
        m = 1 if scalar else int(n)
        u = (self._raw(m) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
        out = low + (high - low) * u
        return float(out[0]) if scalar else out

    def integers(self, low: int, high: int, n: int | None = None):
        """Uniform integers in [low, high] inclusive; scalar when ``n`` is None.

        Uses the floor of a uniform draw scaled to the span. The modulo bias of
        this construction is < span / 2**53, negligible for the desk-scale
        spans used here (all far below 2**32).
        """
        if high < low:
            raise ValueError(f"empty integer range [{low}, {high}]")
        scalar = n is None
        m = 1 if scalar else int(n)
        span = high - low + 1
        u = (self._raw(m) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
        vals = low + np.minimum((u * span).astype(np.int64), span - 1)
        return int(vals[0]) if scalar else vals

    def normal(self, n: int | None = None, scale: float = 1.0):
        """Standard normals via Box-Muller; scalar when ``n`` is None."""
        scalar = n is None
        m = 1 if scalar else int(n)
        pairs = (m + 1) // 2
        u = (self._raw(2 * pairs) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
        u1 = np.maximum(u[:pairs], 1.0 / (1 << 53))
        u2 = u[pairs:]
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:m] * scale
        return float(out[0]) if scalar else out

    def normal_array(self, shape, scale: float = 1.0, dtype=np.float64) -> np.ndarray:
        n = int(np.prod(shape))
        return self.normal(n, scale=scale).reshape(shape).astype(dtype)

    def uniform_array(self, shape, low: float = 0.0, high: float = 1.0, dtype=np.float64) -> np.ndarray:
        n = int(np.prod(shape))
        return self.uniform(n, low=low, high=high).reshape(shape).astype(dtype)

    def choice(self, options):
        """Pick one element of a non-empty sequence uniformly."""
        return options[self.integers(0, len(options) - 1)]

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of arange(n) driven by this stream."""
        perm = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.integers(0, i)
            perm[i], perm[j] = perm[j], perm[i]
        return perm
