"""Counter-based Philox4x32-10 generator for the random-walk kernels.

Every draw is a pure function of ``(key, counter)``, so a walker gets the
same numbers no matter which thread runs it or in what order. The key is
the 64-bit seed; the counter is ``(block, stream, walker_lo, walker_hi)``.

Normals come from Box-Muller on consecutive blocks of a walker's step
stream, four per block.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)

STREAM_STEP = 0
STREAM_INIT = 1

_TWO_PI = 2.0 * math.pi
_INV_2_32 = 1.0 / 4294967296.0


@njit(cache=True, inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds on uint64 values holding 32-bit words."""
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _SHIFT
        lo0 = p0 & _MASK
        hi1 = p1 >> _SHIFT
        lo1 = p1 & _MASK
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@njit(cache=True, inline="always")
def split_seed(seed):
    s = np.uint64(seed)
    return s & _MASK, s >> _SHIFT


@njit(cache=True, inline="always")
def uniforms4(counter, stream, walker, k0, k1):
    """Four uniforms in (0, 1) for one (counter, stream, walker) triple."""
    w = np.uint64(walker)
    r0, r1, r2, r3 = philox4x32(
        np.uint64(counter) & _MASK, np.uint64(stream), w & _MASK, w >> _SHIFT, k0, k1
    )
    return (
        (float(r0) + 0.5) * _INV_2_32,
        (float(r1) + 0.5) * _INV_2_32,
        (float(r2) + 0.5) * _INV_2_32,
        (float(r3) + 0.5) * _INV_2_32,
    )


@njit(cache=True, inline="always")
def normals4(counter, stream, walker, k0, k1):
    """Four standard normals via Box-Muller on one Philox block."""
    u0, u1, u2, u3 = uniforms4(counter, stream, walker, k0, k1)
    ra = math.sqrt(-2.0 * math.log(u0))
    rb = math.sqrt(-2.0 * math.log(u2))
    return (
        ra * math.cos(_TWO_PI * u1),
        ra * math.sin(_TWO_PI * u1),
        rb * math.cos(_TWO_PI * u3),
        rb * math.sin(_TWO_PI * u3),
    )


@njit(cache=True)
def _block(c0, c1, c2, c3, k0, k1):
    r = philox4x32(np.uint64(c0), np.uint64(c1), np.uint64(c2), np.uint64(c3), np.uint64(k0), np.uint64(k1))
    out = np.empty(4, dtype=np.uint32)
    for i in range(4):
        out[i] = np.uint32(r[i])
    return out


def philox_block(counter, key) -> np.ndarray:
    """Raw Philox4x32-10 output block for a 4-word counter and 2-word key."""
    c = [int(v) & 0xFFFFFFFF for v in counter]
    k = [int(v) & 0xFFFFFFFF for v in key]
    return _block(c[0], c[1], c[2], c[3], k[0], k[1])


@njit(cache=True)
def _normal_table(n, stream, walker, seed):
    k0, k1 = split_seed(seed)
    out = np.empty(4 * ((n + 3) // 4))
    for b in range(out.size // 4):
        out[4 * b], out[4 * b + 1], out[4 * b + 2], out[4 * b + 3] = normals4(b, stream, walker, k0, k1)
    return out[:n]


def walker_normals(seed: int, walker: int, n: int, stream: int = STREAM_STEP) -> np.ndarray:
    """First ``n`` normals of a walker's stream, in the order the kernels draw them."""
    return _normal_table(n, stream, walker, np.uint64(seed))
