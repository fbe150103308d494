"""
CPython-compatible Mersenne Twister for numba code.

A generator is a ``uint32[625]`` array: the 624-word state followed by the
read position, exactly as ``random.Random.getstate()`` lays it out. The
draw functions reproduce ``random()``, ``getrandbits(k)`` (k <= 32),
``randint`` and the ``expovariate`` based settling delay bit for bit, so
compiled runs consume the same streams as the pure-Python reference.
"""

from __future__ import annotations

import math
import random

import numba as nb
import numpy as np

N = 624
M = 397


def mt_state(rng: random.Random) -> np.ndarray:
    """Snapshot of ``rng`` as a numba-usable array (the Python object is not advanced)."""
    _, internal, _ = rng.getstate()
    return np.array(internal, dtype=np.uint32)


def restore(rng: random.Random, state: np.ndarray) -> None:
    version, _, gauss = rng.getstate()
    rng.setstate((version, tuple(int(x) for x in state), gauss))


@nb.njit(cache=True)
def _regenerate(mt):
    for kk in range(N):
        y = (mt[kk] & np.uint32(0x80000000)) | (mt[(kk + 1) % N] & np.uint32(0x7FFFFFFF))
        v = mt[(kk + M) % N] ^ (y >> np.uint32(1))
        if y & np.uint32(1):
            v ^= np.uint32(0x9908B0DF)
        mt[kk] = v


@nb.njit(cache=True)
def genrand(mt) -> np.uint32:
    idx = mt[N]
    if idx >= N:
        _regenerate(mt)
        idx = 0
    y = mt[idx]
    mt[N] = idx + 1
    y ^= y >> np.uint32(11)
    y ^= (y << np.uint32(7)) & np.uint32(0x9D2C5680)
    y ^= (y << np.uint32(15)) & np.uint32(0xEFC60000)
    y ^= y >> np.uint32(18)
    return y


@nb.njit(cache=True)
def rand_float(mt) -> float:
    a = np.int64(genrand(mt) >> np.uint32(5))
    b = np.int64(genrand(mt) >> np.uint32(6))
    return (a * 67108864.0 + b) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True)
def getrandbits(mt, k: int) -> int:
    return np.int64(genrand(mt) >> np.uint32(32 - k))


@nb.njit(cache=True)
def randbelow(mt, n: int) -> int:
    k = 0
    m = n
    while m:
        k += 1
        m >>= 1
    r = getrandbits(mt, k)
    while r >= n:
        r = getrandbits(mt, k)
    return r


@nb.njit(cache=True)
def randint(mt, a: int, b: int) -> int:
    return a + randbelow(mt, b - a + 1)


@nb.njit(cache=True)
def settle_delay(mt, lambd: float) -> int:
    """``max(1, ceil(expovariate(lambd)))``."""
    x = -math.log(1.0 - rand_float(mt)) / lambd
    c = np.int64(math.ceil(x))
    return c if c > 1 else 1
