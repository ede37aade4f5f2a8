"""Random access into gzip files through deflate-block checkpoints.

A checkpoint records where a deflate block starts (byte and bit), the
uncompressed offset at that point, and the preceding 32 KiB of output. To
read from the middle of a file, the compressed stream is realigned to the
checkpoint's bit, a raw inflater is primed with the window as its dictionary,
and decoding resumes there instead of at the start of the file.

Finding block boundaries requires decoding every Huffman symbol, which the
stdlib ``zlib`` module does not expose; ``kernels.inflate_block`` does that
pass. Reads go through ``zlib`` itself.

``.chk`` layout (little-endian)::

    b"IRGZ1" u8 version, 32-byte sha256 of the gzip file, u64 interval,
    u64 count, u64 total_uncompressed, then per checkpoint:
    u64 comp_byte, u8 comp_bit, u8 flags (1 = member start),
    u64 uncomp_offset, u32 n, n bytes of zlib-compressed 32 KiB window
"""

from __future__ import annotations

import bisect
import hashlib
import os
import struct
import threading
import urllib.parse
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorruptGzip, IndexMismatch, OutOfRange
from .fetch import FileLock, sha256_file

WINDOW = 32768
DEFAULT_INTERVAL = 8 << 20
MIN_INTERVAL = 64 << 10
MAGIC = b"IRGZ1"
VERSION = 1
_HEADER = struct.Struct("<B32sQQQ")
_ENTRY = struct.Struct("<QBBQI")
_ZERO_WINDOW = bytes(WINDOW)
_FTEXT, _FHCRC, _FEXTRA, _FNAME, _FCOMMENT = 1, 2, 4, 8, 16


@dataclass(frozen=True)
class Checkpoint:
    comp_byte: int
    comp_bit: int
    uncomp_offset: int
    window: bytes = field(repr=False)
    member_start: bool = False


@dataclass
class CheckpointIndex:
    source_sha256: str
    interval: int
    checkpoints: list
    total_uncompressed: int

    def __post_init__(self):
        self._starts = [c.uncomp_offset for c in self.checkpoints]

    def locate(self, offset: int) -> int:
        """Position of the last checkpoint at or before ``offset``."""
        return bisect.bisect_right(self._starts, offset) - 1

    def save(self, path):
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "wb") as f:
            f.write(MAGIC)
            f.write(_HEADER.pack(VERSION, bytes.fromhex(self.source_sha256), self.interval,
                                 len(self.checkpoints), self.total_uncompressed))
            for c in self.checkpoints:
                packed = zlib.compress(c.window, 9)
                f.write(_ENTRY.pack(c.comp_byte, c.comp_bit, int(c.member_start),
                                    c.uncomp_offset, len(packed)))
                f.write(packed)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "CheckpointIndex":
        with open(path, "rb") as f:
            blob = f.read()
        if blob[:5] != MAGIC:
            raise ValueError(f"{path}: not a checkpoint index")
        version, digest, interval, count, total = _HEADER.unpack_from(blob, 5)
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        pos = 5 + _HEADER.size
        cps = []
        for _ in range(count):
            comp_byte, bit, flags, uncomp, n = _ENTRY.unpack_from(blob, pos)
            pos += _ENTRY.size
            window = zlib.decompress(blob[pos:pos + n])
            pos += n
            cps.append(Checkpoint(comp_byte, bit, uncomp, window, bool(flags & 1)))
        return cls(digest.hex(), interval, cps, total)


def checkpoint_path(gz_path) -> Path:
    return Path(str(gz_path) + ".chk")


# -- building -----------------------------------------------------------------

class _Input:
    """Sliding buffer over the compressed file; hashes every byte read."""

    def __init__(self, f, chunk_size):
        self.f = f
        self.chunk_size = chunk_size
        self.buf = np.empty(0, dtype=np.uint8)
        self.base = 0
        self.eof = False
        self.sha = hashlib.sha256()

    @property
    def end(self):
        return self.base + self.buf.shape[0]

    def more(self, keep_from: int) -> bool:
        data = self.f.read(self.chunk_size)
        if not data:
            self.eof = True
            return False
        self.sha.update(data)
        drop = max(0, min(keep_from, self.end) - self.base)
        self.buf = np.concatenate((self.buf[drop:], np.frombuffer(data, dtype=np.uint8)))
        self.base += drop
        return True

    def take(self, pos: int, n: int) -> bytes | None:
        while self.end < pos + n:
            if not self.more(pos):
                return None
        a = pos - self.base
        return self.buf[a:a + n].tobytes()


def _parse_header(src: _Input, pos: int) -> int:
    """Return the offset of the deflate data following a gzip header."""
    head = src.take(pos, 10)
    if head is None:
        raise CorruptGzip(pos, "truncated gzip header")
    if head[:2] != b"\x1f\x8b" or head[2] != 8:
        raise CorruptGzip(pos, "bad gzip magic or method")
    flags = head[3]
    p = pos + 10
    if flags & _FEXTRA:
        raw = src.take(p, 2)
        if raw is None:
            raise CorruptGzip(p, "truncated gzip header")
        p += 2 + int.from_bytes(raw, "little")
    for flag in (_FNAME, _FCOMMENT):
        if flags & flag:
            while True:
                b = src.take(p, 1)
                if b is None:
                    raise CorruptGzip(p, "truncated gzip header")
                p += 1
                if b == b"\0":
                    break
    if flags & _FHCRC:
        p += 2
    return p


def _window_of(out, outpos) -> bytes:
    lo = max(0, outpos - WINDOW)
    w = out[lo:outpos].tobytes()
    return w if len(w) == WINDOW else bytes(WINDOW - len(w)) + w


def build_checkpoints(gz_path, interval=DEFAULT_INTERVAL, *, chunk_size=4 << 20) -> CheckpointIndex:
    """One full decoding pass over ``gz_path`` recording a checkpoint at the
    start of every gzip member and at the first block boundary at or after
    each multiple of ``interval`` uncompressed bytes."""
    from . import kernels

    if interval < MIN_INTERVAL:
        raise ValueError(f"interval must be at least {MIN_INTERVAL} bytes")
    cps = []

    def record(cp):
        if cps and cps[-1].uncomp_offset == cp.uncomp_offset:
            if cps[-1].member_start and not cp.member_start:
                return
            cps[-1] = cp
        else:
            cps.append(cp)

    total = 0
    with open(gz_path, "rb") as f:
        src = _Input(f, chunk_size)
        member_pos = 0
        while True:
            data_pos = _parse_header(src, member_pos)
            record(Checkpoint(data_pos, 0, total, _ZERO_WINDOW, True))
            next_mark = (total // interval + 1) * interval
            out = np.zeros(WINDOW + (1 << 22), dtype=np.uint8)
            outpos = 0
            crc = 0
            size = 0
            bitpos = data_pos * 8
            first = True
            while True:
                if not first and total >= next_mark:
                    record(Checkpoint(bitpos >> 3, bitpos & 7, total, _window_of(out, outpos)))
                    next_mark = (total // interval + 1) * interval
                rel = bitpos - src.base * 8
                status, nbit, nout, final = kernels.inflate_block(src.buf, rel, out, outpos)
                if status == kernels.NEED_INPUT:
                    if not src.more(bitpos >> 3):
                        raise CorruptGzip(bitpos >> 3, "unexpected end of file")
                    continue
                if status == kernels.NEED_OUTPUT:
                    if outpos > WINDOW:
                        out[:WINDOW] = out[outpos - WINDOW:outpos]
                        outpos = WINDOW
                    else:
                        out = np.concatenate((out, np.zeros(out.shape[0], dtype=np.uint8)))
                    continue
                if status != kernels.OK:
                    raise CorruptGzip(bitpos >> 3, "invalid deflate data")
                produced = out[outpos:nout]
                crc = zlib.crc32(produced, crc)
                size += nout - outpos
                total += nout - outpos
                outpos = nout
                bitpos = src.base * 8 + int(nbit)
                first = False
                if outpos > out.shape[0] // 2 and outpos > WINDOW:
                    out[:WINDOW] = out[outpos - WINDOW:outpos]
                    outpos = WINDOW
                if final:
                    break
            trailer_pos = (bitpos + 7) >> 3
            trailer = src.take(trailer_pos, 8)
            if trailer is None:
                raise CorruptGzip(trailer_pos, "missing gzip trailer")
            want_crc, want_size = struct.unpack("<II", trailer)
            if want_crc != crc or want_size != size & 0xFFFFFFFF:
                raise CorruptGzip(trailer_pos, "gzip trailer CRC/size mismatch")
            member_pos = trailer_pos + 8
            nxt = src.take(member_pos, 2)
            if nxt is None or nxt == b"\0\0":
                rest = src.take(member_pos, 1)
                # allow trailing NUL padding after the last member
                while rest is not None and rest == b"\0":
                    member_pos += 1
                    rest = src.take(member_pos, 1)
                if rest is None:
                    break
                raise CorruptGzip(member_pos, "garbage after gzip member")
        while src.more(src.end):
            pass
    return CheckpointIndex(src.sha.hexdigest(), interval, cps, total)


def load_or_build(gz_path, interval=DEFAULT_INTERVAL) -> CheckpointIndex:
    """Use ``<gz_path>.chk`` when it matches the file, else build and save it."""
    chk = checkpoint_path(gz_path)
    if chk.exists():
        try:
            index = CheckpointIndex.load(chk)
            if index.source_sha256 == _file_digest(gz_path):
                return index
        except (ValueError, struct.error, zlib.error):
            pass
    with FileLock(chk):
        index = build_checkpoints(gz_path, interval)
        index.save(chk)
    return index


# -- reading ------------------------------------------------------------------

_digests: dict = {}
_digest_lock = threading.Lock()


def _file_digest(path) -> str:
    st = os.stat(path)
    key = (os.path.abspath(path), st.st_size, st.st_mtime_ns)
    with _digest_lock:
        if key in _digests:
            return _digests[key]
    digest = sha256_file(path)
    with _digest_lock:
        _digests[key] = digest
    return digest


class GzipSeeker:
    """Reads uncompressed byte ranges of one gzip file via its index.

    ``bytes_read`` counts compressed bytes pulled from disk.
    """

    def __init__(self, gz_path, index: CheckpointIndex, *, chunk_size=1 << 16,
                 check_hash=True):
        self.path = Path(gz_path)
        self.index = index
        self.chunk_size = chunk_size
        self.bytes_read = 0
        if check_hash:
            actual = _file_digest(self.path)
            if actual != index.source_sha256:
                raise IndexMismatch(index.source_sha256, actual)
        from . import kernels

        self._shift = kernels.shift_bits

    def _pieces(self, cp: Checkpoint):
        """Uncompressed output from ``cp`` to the end of its gzip member."""
        inflater = zlib.decompressobj(-15, zdict=cp.window) if not cp.member_start \
            else zlib.decompressobj(-15)
        with open(self.path, "rb") as f:
            f.seek(cp.comp_byte)
            carry = b""
            while not inflater.eof:
                chunk = f.read(self.chunk_size)
                self.bytes_read += len(chunk)
                if not chunk:
                    raise CorruptGzip(f.tell(), "unexpected end of file")
                if cp.comp_bit:
                    joined = np.frombuffer(carry + chunk, dtype=np.uint8)
                    carry = chunk[-1:]
                    data = self._shift(joined, cp.comp_bit).tobytes()
                else:
                    data = chunk
                try:
                    piece = inflater.decompress(data, 1 << 20)
                    while True:
                        if piece:
                            yield piece
                        if not inflater.unconsumed_tail or inflater.eof:
                            break
                        piece = inflater.decompress(inflater.unconsumed_tail, 1 << 20)
                except zlib.error as exc:
                    raise CorruptGzip(cp.comp_byte, f"inflate failed: {exc}") from None

    def read_at(self, offset: int, length: int) -> bytes:
        total = self.index.total_uncompressed
        if offset < 0 or length < 0 or offset + length > total or (length and offset >= total):
            raise OutOfRange(f"[{offset}, {offset + length}) outside [0, {total})")
        if length == 0:
            return b""
        i = self.index.locate(offset)
        cp = self.index.checkpoints[i]
        pos = cp.uncomp_offset
        out = bytearray()
        while True:
            for piece in self._pieces(cp):
                end = pos + len(piece)
                if end > offset:
                    out += piece[max(0, offset - pos):offset + length - pos]
                    if len(out) >= length:
                        return bytes(out)
                pos = end
            # member finished: continue at the checkpoint that starts the next one
            i += 1
            cps = self.index.checkpoints
            while i < len(cps) and cps[i].uncomp_offset < pos:
                i += 1
            if i >= len(cps) or cps[i].uncomp_offset != pos:
                raise CorruptGzip(cp.comp_byte, "index does not cover the next member")
            cp = cps[i]


def read_at(gz_path, index: CheckpointIndex, uncomp_offset: int, length: int) -> bytes:
    return GzipSeeker(gz_path, index).read_at(uncomp_offset, length)


class FetchCache:
    """On-disk cache of uncompressed slices keyed by (source, offset, length)."""

    def __init__(self, cache_dir):
        self.cache_dir = Path(cache_dir)
        self._sources = {}

    def register(self, source_id: str, gz_path, index: CheckpointIndex | None = None):
        if index is None:
            index = load_or_build(gz_path)
        self._sources[source_id] = GzipSeeker(gz_path, index)

    def seeker(self, source_id) -> GzipSeeker:
        return self._sources[source_id]

    def _slot(self, source_id, offset, length) -> Path:
        safe = urllib.parse.quote(source_id, safe="")
        return self.cache_dir / safe / f"{offset}-{length}.bin"

    def cached_fetch(self, source_id: str, uncomp_offset: int, length: int) -> bytes:
        slot = self._slot(source_id, uncomp_offset, length)
        try:
            with open(slot, "rb") as f:
                data = f.read()
            if len(data) == length:
                return data
        except FileNotFoundError:
            pass
        data = self._sources[source_id].read_at(uncomp_offset, length)
        slot.parent.mkdir(parents=True, exist_ok=True)
        with FileLock(slot):
            tmp = slot.with_name(slot.name + f".{os.getpid()}.tmp")
            with open(tmp, "wb") as f:
                f.write(data)
            os.replace(tmp, slot)
        return data

    def clear(self):
        import shutil

        shutil.rmtree(self.cache_dir, ignore_errors=True)


class GzipDocstore:
    """Document lookup straight from a gzip'd TREC SGML file.

    One streaming pass records the uncompressed span of every ``<DOC>``
    block; lookups then fetch that span through the checkpoint index and
    the on-disk slice cache, so no decompressed copy of the corpus is kept.
    """

    SPANS_NAME = "gzdocs.npz"

    def __init__(self, gz_path, directory, *, interval=DEFAULT_INTERVAL, cache_dir=None):
        self.gz_path = Path(gz_path)
        self.directory = Path(directory)
        self.index = load_or_build(self.gz_path, interval)
        self._load_spans()
        self.cache = FetchCache(cache_dir or self.directory / "slices")
        self.cache.register("docs", self.gz_path, self.index)
        self.decoded = 0

    def _load_spans(self):
        from .formats import iter_trec_doc_spans, open_source

        path = self.directory / self.SPANS_NAME
        with FileLock(path):
            if not path.exists():
                ids, starts, ends = [], [], []
                with open_source(self.gz_path) as f:
                    for rec, a, b in iter_trec_doc_spans(f, source_name=str(self.gz_path)):
                        ids.append(rec.doc_id.encode("utf-8"))
                        starts.append(a)
                        ends.append(b)
                self.directory.mkdir(parents=True, exist_ok=True)
                tmp = path.with_name("tmp-" + path.name)
                np.savez(tmp, ids=np.array(ids, dtype=bytes) if ids else np.zeros(0, "S1"),
                         starts=np.array(starts, dtype=np.uint64),
                         ends=np.array(ends, dtype=np.uint64))
                os.replace(tmp, path)
        with np.load(path) as z:
            self._ids = z["ids"]
            self._starts = z["starts"]
            self._ends = z["ends"]
        self._sorted = np.argsort(self._ids, kind="stable")
        self._sorted_ids = self._ids[self._sorted]

    def count(self) -> int:
        return len(self._ids)

    __len__ = count

    def _fetch(self, row):
        from .formats import parse_trec_doc_block

        a, b = int(self._starts[row]), int(self._ends[row])
        block = self.cache.cached_fetch("docs", a, b - a)
        self.decoded += 1
        return parse_trec_doc_block(block)

    def _row(self, doc_id):
        key = doc_id.encode("utf-8")
        i = int(np.searchsorted(self._sorted_ids, key))
        if i < len(self._sorted_ids) and self._sorted_ids[i] == key and key:
            return int(self._sorted[i])
        return -1

    def get(self, doc_id: str):
        from .errors import DocNotFound

        row = self._row(doc_id)
        if row < 0:
            raise DocNotFound(doc_id)
        return self._fetch(row)

    def get_many(self, doc_ids) -> dict:
        out = {}
        for doc_id in doc_ids:
            row = self._row(doc_id)
            if row >= 0 and doc_id not in out:
                out[doc_id] = self._fetch(row)
        return out

    def get_many_iter(self, doc_ids):
        rows = sorted({r for r in (self._row(d) for d in doc_ids) if r >= 0})
        for row in rows:
            yield self._fetch(row)

    def read_positions(self, positions: range):
        for row in positions:
            yield self._fetch(row)

    def __iter__(self):
        return self.read_positions(range(self.count()))

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        pass
