"""Counter-based uniforms: every draw is a pure function of (key, counter).

The mixer is the splitmix64 finaliser.  A jitted copy drives the enumeration
kernels; the plain Python copy is used for single queries and for testing
that both agree bit for bit.
"""

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, replica: int, level: int) -> int:
    """64-bit key of the stream feeding one tree level of one replica."""
    k = mix64(seed + GOLDEN)
    k = mix64(k ^ mix64(replica + 2 * GOLDEN))
    return mix64(k ^ mix64(level + 3 * GOLDEN))


def uniform(key: int, counter: int) -> float:
    z = mix64(key ^ mix64(counter + GOLDEN))
    return (z >> 11) * _INV53


@njit(cache=True, inline="always")
def _mix64_nb(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def uniform_nb(key, counter):
    z = _mix64_nb(key ^ _mix64_nb(np.uint64(counter) + np.uint64(GOLDEN)))
    return np.float64(z >> np.uint64(11)) * _INV53


@njit(cache=True, inline="always")
def inverse_cdf(cdf, k, u):
    for idx in range(k - 1):
        if u < cdf[idx]:
            return idx
    return k - 1
