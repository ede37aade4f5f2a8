"""Single-block raw deflate decoder used to locate block boundaries.

Written in the numba-compatible subset of Python: the same function body is
compiled by ``kernels._jit`` and run as-is by the fallback backend.
"""

import numpy as np

try:
    from numba.extending import register_jitable
except ImportError:  # pragma: no cover - numba missing
    def register_jitable(fn):
        return fn

OK = 0
NEED_INPUT = 1
NEED_OUTPUT = 2
BAD_DATA = 3

LEN_BASE = np.array([3, 4, 5, 6, 7, 8, 9, 10, 11, 13, 15, 17, 19, 23, 27, 31,
                     35, 43, 51, 59, 67, 83, 99, 115, 131, 163, 195, 227, 258],
                    dtype=np.int64)
LEN_EXTRA = np.array([0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2,
                      3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0], dtype=np.int64)
DIST_BASE = np.array([1, 2, 3, 4, 5, 7, 9, 13, 17, 25, 33, 49, 65, 97, 129,
                      193, 257, 385, 513, 769, 1025, 1537, 2049, 3073, 4097,
                      6145, 8193, 12289, 16385, 24577], dtype=np.int64)
DIST_EXTRA = np.array([0, 0, 0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6, 7, 7,
                       8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13], dtype=np.int64)
CL_ORDER = np.array([16, 17, 18, 0, 8, 7, 9, 6, 10, 5, 11, 4, 12, 3, 13, 2,
                     14, 1, 15], dtype=np.int64)


@register_jitable
def build_table(lengths, nsym):
    """Canonical Huffman lookup table indexed by bit-reversed codes.

    Entries are ``symbol << 4 | code_length``; 0 marks an unused slot.
    Returns ``(table, table_bits)``; ``table_bits`` is -1 for an
    over-subscribed code.
    """
    max_len = 0
    bl_count = np.zeros(16, dtype=np.int64)
    for s in range(nsym):
        ln = lengths[s]
        if ln > 0:
            bl_count[ln] += 1
            if ln > max_len:
                max_len = ln
    if max_len == 0:
        return np.zeros(2, dtype=np.int32), 1
    left = 1
    for ln in range(1, 16):
        left = (left << 1) - bl_count[ln]
        if left < 0:
            return np.zeros(2, dtype=np.int32), -1
    next_code = np.zeros(16, dtype=np.int64)
    code = 0
    for ln in range(1, 16):
        code = (code + bl_count[ln - 1]) << 1
        next_code[ln] = code
    size = 1 << max_len
    table = np.zeros(size, dtype=np.int32)
    for s in range(nsym):
        ln = lengths[s]
        if ln == 0:
            continue
        c = next_code[ln]
        next_code[ln] += 1
        rev = 0
        for _ in range(ln):
            rev = (rev << 1) | (c & 1)
            c >>= 1
        entry = (s << 4) | ln
        step = 1 << ln
        j = rev
        while j < size:
            table[j] = entry
            j += step
    return table, max_len


def inflate_block(src, bitpos, out, outpos):
    """Decode one deflate block starting at bit ``bitpos`` of ``src``.

    Output is appended at ``out[outpos:]``; ``out[:outpos]`` is the history
    that back-references may reach. Returns ``(status, bitpos, outpos,
    final)``. On any status other than OK the returned positions are the
    ones passed in, so the call can be retried with more input or space.
    """
    start_bit = bitpos
    start_out = outpos
    n = src.shape[0]
    nout = out.shape[0]
    pos = bitpos >> 3
    bitbuf = 0
    bitcnt = 0
    skip = bitpos & 7
    if skip:
        if pos >= n:
            return NEED_INPUT, start_bit, start_out, 0
        bitbuf = np.int64(src[pos]) >> skip
        bitcnt = 8 - skip
        pos += 1

    while bitcnt < 3:
        if pos >= n:
            return NEED_INPUT, start_bit, start_out, 0
        bitbuf |= np.int64(src[pos]) << bitcnt
        pos += 1
        bitcnt += 8
    final = bitbuf & 1
    btype = (bitbuf >> 1) & 3
    bitbuf >>= 3
    bitcnt -= 3

    if btype == 0:
        # stored: discard to the byte boundary, then LEN/NLEN and raw bytes
        pos -= bitcnt >> 3
        if pos + 4 > n:
            return NEED_INPUT, start_bit, start_out, 0
        length = np.int64(src[pos]) | (np.int64(src[pos + 1]) << 8)
        nlength = np.int64(src[pos + 2]) | (np.int64(src[pos + 3]) << 8)
        if length != (~nlength & 0xFFFF):
            return BAD_DATA, start_bit, start_out, 0
        pos += 4
        if pos + length > n:
            return NEED_INPUT, start_bit, start_out, 0
        if outpos + length > nout:
            return NEED_OUTPUT, start_bit, start_out, 0
        for i in range(length):
            out[outpos + i] = src[pos + i]
        outpos += length
        pos += length
        return OK, pos * 8, outpos, final

    if btype == 3:
        return BAD_DATA, start_bit, start_out, 0

    if btype == 1:
        lengths = np.zeros(320, dtype=np.int64)
        for s in range(144):
            lengths[s] = 8
        for s in range(144, 256):
            lengths[s] = 9
        for s in range(256, 280):
            lengths[s] = 7
        for s in range(280, 288):
            lengths[s] = 8
        lit, lit_bits = build_table(lengths, 288)
        for s in range(30):
            lengths[s] = 5
        dist, dist_bits = build_table(lengths, 30)
    else:
        while bitcnt < 14:
            if pos >= n:
                return NEED_INPUT, start_bit, start_out, 0
            bitbuf |= np.int64(src[pos]) << bitcnt
            pos += 1
            bitcnt += 8
        nlen = (bitbuf & 31) + 257
        ndist = ((bitbuf >> 5) & 31) + 1
        ncode = ((bitbuf >> 10) & 15) + 4
        bitbuf >>= 14
        bitcnt -= 14
        if nlen > 286 or ndist > 30:
            return BAD_DATA, start_bit, start_out, 0
        cl_lengths = np.zeros(19, dtype=np.int64)
        for i in range(ncode):
            while bitcnt < 3:
                if pos >= n:
                    return NEED_INPUT, start_bit, start_out, 0
                bitbuf |= np.int64(src[pos]) << bitcnt
                pos += 1
                bitcnt += 8
            cl_lengths[CL_ORDER[i]] = bitbuf & 7
            bitbuf >>= 3
            bitcnt -= 3
        cl, cl_bits = build_table(cl_lengths, 19)
        if cl_bits < 0:
            return BAD_DATA, start_bit, start_out, 0
        cl_mask = (1 << cl_bits) - 1
        lengths = np.zeros(320, dtype=np.int64)
        idx = 0
        total = nlen + ndist
        while idx < total:
            while bitcnt < cl_bits and pos < n:
                bitbuf |= np.int64(src[pos]) << bitcnt
                pos += 1
                bitcnt += 8
            e = cl[bitbuf & cl_mask]
            ln = e & 15
            if ln == 0:
                if bitcnt < cl_bits:
                    return NEED_INPUT, start_bit, start_out, 0
                return BAD_DATA, start_bit, start_out, 0
            if ln > bitcnt:
                return NEED_INPUT, start_bit, start_out, 0
            bitbuf >>= ln
            bitcnt -= ln
            sym = e >> 4
            if sym < 16:
                lengths[idx] = sym
                idx += 1
                continue
            if sym == 16:
                nb = 2
                base = 3
            elif sym == 17:
                nb = 3
                base = 3
            else:
                nb = 7
                base = 11
            while bitcnt < nb:
                if pos >= n:
                    return NEED_INPUT, start_bit, start_out, 0
                bitbuf |= np.int64(src[pos]) << bitcnt
                pos += 1
                bitcnt += 8
            rep = base + (bitbuf & ((1 << nb) - 1))
            bitbuf >>= nb
            bitcnt -= nb
            if sym == 16:
                if idx == 0:
                    return BAD_DATA, start_bit, start_out, 0
                val = lengths[idx - 1]
            else:
                val = 0
            if idx + rep > total:
                return BAD_DATA, start_bit, start_out, 0
            for _ in range(rep):
                lengths[idx] = val
                idx += 1
        if lengths[256] == 0:
            return BAD_DATA, start_bit, start_out, 0
        lit, lit_bits = build_table(lengths[:nlen], nlen)
        dist, dist_bits = build_table(lengths[nlen:nlen + ndist], ndist)
        if lit_bits < 0 or dist_bits < 0:
            return BAD_DATA, start_bit, start_out, 0

    lit_mask = (1 << lit_bits) - 1
    dist_mask = (1 << dist_bits) - 1
    while True:
        while bitcnt < lit_bits and pos < n:
            bitbuf |= np.int64(src[pos]) << bitcnt
            pos += 1
            bitcnt += 8
        e = lit[bitbuf & lit_mask]
        ln = e & 15
        if ln == 0:
            if bitcnt < lit_bits:
                return NEED_INPUT, start_bit, start_out, 0
            return BAD_DATA, start_bit, start_out, 0
        if ln > bitcnt:
            return NEED_INPUT, start_bit, start_out, 0
        bitbuf >>= ln
        bitcnt -= ln
        sym = e >> 4
        if sym < 256:
            if outpos >= nout:
                return NEED_OUTPUT, start_bit, start_out, 0
            out[outpos] = sym
            outpos += 1
            continue
        if sym == 256:
            break
        sym -= 257
        if sym >= 29:
            return BAD_DATA, start_bit, start_out, 0
        nb = LEN_EXTRA[sym]
        while bitcnt < nb:
            if pos >= n:
                return NEED_INPUT, start_bit, start_out, 0
            bitbuf |= np.int64(src[pos]) << bitcnt
            pos += 1
            bitcnt += 8
        length = LEN_BASE[sym] + (bitbuf & ((1 << nb) - 1))
        bitbuf >>= nb
        bitcnt -= nb

        while bitcnt < dist_bits and pos < n:
            bitbuf |= np.int64(src[pos]) << bitcnt
            pos += 1
            bitcnt += 8
        e = dist[bitbuf & dist_mask]
        ln = e & 15
        if ln == 0:
            if bitcnt < dist_bits:
                return NEED_INPUT, start_bit, start_out, 0
            return BAD_DATA, start_bit, start_out, 0
        if ln > bitcnt:
            return NEED_INPUT, start_bit, start_out, 0
        bitbuf >>= ln
        bitcnt -= ln
        dsym = e >> 4
        if dsym >= 30:
            return BAD_DATA, start_bit, start_out, 0
        nb = DIST_EXTRA[dsym]
        while bitcnt < nb:
            if pos >= n:
                return NEED_INPUT, start_bit, start_out, 0
            bitbuf |= np.int64(src[pos]) << bitcnt
            pos += 1
            bitcnt += 8
        d = DIST_BASE[dsym] + (bitbuf & ((1 << nb) - 1))
        bitbuf >>= nb
        bitcnt -= nb
        if d > outpos:
            return BAD_DATA, start_bit, start_out, 0
        if outpos + length > nout:
            return NEED_OUTPUT, start_bit, start_out, 0
        for i in range(length):
            out[outpos + i] = out[outpos + i - d]
        outpos += length

    return OK, pos * 8 - bitcnt, outpos, final
