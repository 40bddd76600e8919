"""Counter-based random numbers (Philox4x32-10) usable from numba kernels.

Every draw is a pure function of ``(seed, stream, path, counter)``, so a path
can be regenerated in isolation and the result never depends on how paths are
split across workers.
"""

import numpy as np
from numba import njit

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)
_INV32 = 1.0 / 4294967296.0


@njit(cache=True, nogil=True, error_model="numpy")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten-round Philox4x32 block. All arguments and results are uint64 holding 32-bit words."""
    for i in range(10):
        if i > 0:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _SHIFT
        lo0 = p0 & _MASK
        hi1 = p1 >> _SHIFT
        lo1 = p1 & _MASK
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
    return c0, c1, c2, c3


@njit(cache=True, nogil=True, error_model="numpy")
def to_unit(w):
    """Map a 32-bit word to the open interval (0, 1)."""
    return (np.float64(w) + 0.5) * _INV32


@njit(cache=True, nogil=True, error_model="numpy")
def uniforms4(key0, key1, stream, path, counter):
    """Four uniforms in (0, 1) for the block addressed by ``(stream, path, counter)``."""
    c = np.uint64(counter)
    w0, w1, w2, w3 = philox4x32(
        c & _MASK, c >> _SHIFT, np.uint64(path) & _MASK, np.uint64(stream) & _MASK, key0, key1
    )
    return to_unit(w0), to_unit(w1), to_unit(w2), to_unit(w3)


def split_seed(seed):
    """Split a 64-bit integer seed into the two 32-bit Philox key words."""
    s = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.uint64(s & 0xFFFFFFFF), np.uint64(s >> 32)


def uniform_block(seed, stream, path, counter):
    """Python-level access to one block, mostly for tests and reproducibility checks."""
    k0, k1 = split_seed(seed)
    return uniforms4(k0, k1, np.uint64(stream), np.uint64(path), np.uint64(counter))
