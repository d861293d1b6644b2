"""Deterministic, counter-based random streams for the synthetic generator.

The scheme is fixed and documented so generated datasets are reproducible
bit-for-bit on one platform and to ~1e-12 across platforms (libm sin/cos/log
may differ in the last ulp):

* raw 64-bit word i of stream `seed`:  ``mix64(seed + (i + 1) * GAMMA)`` where
  ``GAMMA = 0x9E3779B97F4A7C15`` and ``mix64`` is the SplitMix64 finalizer.
  Being counter-based, any sub-range of a stream can be generated
  independently and in parallel.
* uniforms: the top 53 bits of a raw word, mapped to [0, 1) (or (0, 1] where
  a log is taken).
* Gaussians: Box-Muller on consecutive (even, odd) counter pairs;
  ``z0 = sqrt(-2 ln u1) cos(2 pi u2)``, ``z1 = sqrt(-2 ln u1) sin(2 pi u2)``.
* sub-streams: ``derive(seed, tag)`` = ``mix64(seed XOR mix64(tag))``.
"""

from __future__ import annotations

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
_M64 = (1 << 64) - 1


def mix64(z: int) -> int:
    """SplitMix64 output finalizer on a 64-bit word."""
    z &= _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def derive(seed: int, tag: int) -> int:
    """Derive an independent sub-stream seed (e.g. per machine or per series)."""
    return mix64((seed & _M64) ^ mix64(tag))


def raw_words(seed: int, start: int, n: int) -> np.ndarray:
    """Words ``start .. start+n-1`` of the stream, as uint64."""
    idx = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    z = np.uint64(seed & _M64) + idx * np.uint64(GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def uniforms(seed: int, n: int, start: int = 0) -> np.ndarray:
    """n doubles in [0, 1), from consecutive counters."""
    return (raw_words(seed, start, n) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def gaussians(seed: int, n: int) -> np.ndarray:
    """n standard-normal doubles via Box-Muller on counter pairs."""
    m = (n + 1) // 2
    raw = raw_words(seed, 0, 2 * m)
    # u1 in (0, 1] so the log is finite; u2 in [0, 1)
    u1 = ((raw[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u2 = (raw[1::2] >> np.uint64(11)).astype(np.float64) * 2.0**-53
    r = np.sqrt(-2.0 * np.log(u1))
    a = 2.0 * np.pi * u2
    out = np.empty(2 * m)
    out[0::2] = r * np.cos(a)
    out[1::2] = r * np.sin(a)
    return out[:n]
