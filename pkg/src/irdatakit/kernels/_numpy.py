"""Fallback kernels: numpy where the operation vectorizes, plain Python where
it is inherently sequential."""

import numpy as np

from ._inflate import inflate_block  # noqa: F401  (runs interpreted)


def search_fixed(ids, key):
    n, width = ids.shape
    rows = ids.view(f"S{width}").reshape(n)
    target = key.tobytes().rstrip(b"\0")
    lo, hi, probes = 0, n, 0
    while lo < hi:
        mid = (lo + hi) >> 1
        probes += 1
        probe = rows[mid]
        if probe == target:
            return mid, probes
        if probe < target:
            lo = mid + 1
        else:
            hi = mid
    return -1, probes


def shift_bits(src, bit):
    if src.shape[0] < 2:
        return np.empty(0, dtype=np.uint8)
    return (src[:-1] >> np.uint8(bit)) | (src[1:] << np.uint8(8 - bit))
