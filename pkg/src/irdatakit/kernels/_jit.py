"""numba-compiled kernels. Importing this module triggers compilation lazily."""

import numba
import numpy as np

from . import _inflate

_njit = numba.njit(cache=True, nogil=True)

inflate_block = _njit(_inflate.inflate_block)


@_njit
def search_fixed(ids, key):
    n = ids.shape[0]
    width = ids.shape[1]
    lo = 0
    hi = n
    probes = 0
    while lo < hi:
        mid = (lo + hi) >> 1
        probes += 1
        cmp = 0
        for j in range(width):
            a = ids[mid, j]
            b = key[j]
            if a != b:
                cmp = -1 if a < b else 1
                break
        if cmp == 0:
            return mid, probes
        if cmp < 0:
            lo = mid + 1
        else:
            hi = mid
    return -1, probes


@_njit
def shift_bits(src, bit):
    n = src.shape[0] - 1
    out = np.empty(max(n, 0), dtype=np.uint8)
    lo = np.uint8(bit)
    hi = np.uint8(8 - bit)
    for i in range(n):
        out[i] = (src[i] >> lo) | (src[i + 1] << hi)
    return out
