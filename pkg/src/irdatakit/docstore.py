"""ID-addressable document store over an append-only log of lz4 frames.

Three files live in the store directory::

    docs.meta   b"IRDS1" u8 version, u64 count, u16 max_id_len,
                u32 descriptor length + JSON schema descriptor, u8 complete
    docs.index  count x (max_id_len id bytes, NUL padded; u64 offset; u32 length)
    docs.data   one lz4 frame per record, in input order

All integers are little-endian. Inside a frame each field is stored as a u32
byte length followed by UTF-8 bytes (numbers as decimal text). The complete
flag is the last byte of the meta file and is written last.
"""

from __future__ import annotations

import heapq
import json
import os
import shutil
import struct
import tempfile
import threading
from collections import OrderedDict
from pathlib import Path
from typing import Iterable, Iterator

import lz4.frame
import numpy as np

from .entities import Kind, Schema, schema_of
from .errors import DocNotFound, DuplicateDocId, IncompleteStore, StorageError
from .fetch import FileLock

MAGIC = b"IRDS1"
VERSION = 1
META_NAME = "docs.meta"
INDEX_NAME = "docs.index"
DATA_NAME = "docs.data"
ENTRY_TAIL = 12  # u64 offset + u32 length
DEFAULT_MEMORY_BUDGET = 256 << 20
DEFAULT_CACHE_SIZE = 4096
_RUN_ENTRY = struct.Struct("<HQI")
_U32 = struct.Struct("<I")
_ENTRY_OVERHEAD = 120  # rough in-memory bytes per pending (id, offset, length)


def encode_record(record, schema: Schema) -> bytes:
    parts = []
    for spec, value in zip(schema.fields, record):
        raw = spec.kind.to_text(value).encode("utf-8")
        parts.append(_U32.pack(len(raw)))
        parts.append(raw)
    return b"".join(parts)


def decode_record(payload: bytes, schema: Schema):
    values = []
    pos = 0
    for spec in schema.fields:
        (n,) = _U32.unpack_from(payload, pos)
        pos += 4
        text = payload[pos:pos + n].decode("utf-8")
        pos += n
        values.append(text if spec.kind in (Kind.ID, Kind.TEXT) else spec.kind.from_text(text))
    if pos != len(payload):
        raise StorageError(f"trailing bytes in record frame ({len(payload) - pos})")
    return schema.record_cls._make(values)


def compress(payload: bytes) -> bytes:
    return lz4.frame.compress(payload, compression_level=lz4.frame.COMPRESSIONLEVEL_MINHC,
                              content_checksum=False, store_size=False)


def _write_meta(path, count, max_id_len, schema, complete):
    desc = json.dumps(schema.descriptor(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<BQHI", VERSION, count, max_id_len, len(desc)))
        f.write(desc)
        f.write(struct.pack("<B", 1 if complete else 0))
        f.flush()
        os.fsync(f.fileno())


def read_meta(path):
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:5] != MAGIC:
        raise StorageError(f"{path}: bad magic")
    version, count, max_id_len, desc_len = struct.unpack_from("<BQHI", blob, 5)
    if version != VERSION:
        raise StorageError(f"{path}: unsupported version {version}")
    start = 5 + struct.calcsize("<BQHI")
    if len(blob) != start + desc_len + 1:
        raise IncompleteStore(f"{path}: truncated meta")
    desc = json.loads(blob[start:start + desc_len])
    complete = blob[start + desc_len] == 1
    return {"count": count, "max_id_len": max_id_len,
            "schema": Schema.from_descriptor(desc), "complete": complete}


def _spill(run, tmpdir):
    run.sort()
    fd, name = tempfile.mkstemp(dir=tmpdir, suffix=".run")
    with os.fdopen(fd, "wb") as f:
        for key, off, ln in run:
            f.write(_RUN_ENTRY.pack(len(key), off, ln))
            f.write(key)
    return name


def _read_run(name):
    with open(name, "rb") as f:
        while True:
            head = f.read(_RUN_ENTRY.size)
            if not head:
                return
            n, off, ln = _RUN_ENTRY.unpack(head)
            yield f.read(n), off, ln


def build(docs: Iterable, directory, *, schema: Schema | None = None,
          keep_first=False, memory_budget=DEFAULT_MEMORY_BUDGET,
          cache_size=DEFAULT_CACHE_SIZE) -> "Docstore":
    """Write a store for ``docs`` into ``directory`` and open it.

    Doc IDs are sorted externally: pending index entries spill to sorted runs
    on disk once their estimated footprint passes ``memory_budget``.
    Duplicate IDs raise :class:`DuplicateDocId` unless ``keep_first``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with FileLock(directory):
        for name in (META_NAME, INDEX_NAME, DATA_NAME):
            (directory / name).unlink(missing_ok=True)
        tmpdir = tempfile.mkdtemp(prefix=".runs-", dir=directory)
        try:
            count, dropped, schema, max_id = _build_files(
                docs, directory, schema, keep_first, memory_budget, tmpdir)
        finally:
            shutil.rmtree(tmpdir, ignore_errors=True)
        # data and index are fsynced; flipping the flag publishes the store
        _write_meta(directory / META_NAME, count, max_id, schema, complete=True)
    store = Docstore(directory, cache_size=cache_size)
    store.dropped = dropped
    return store


def _build_files(docs, directory, schema, keep_first, memory_budget, tmpdir):
    pending = []
    pending_bytes = 0
    runs = []
    offset = 0
    max_id = 0
    with open(directory / DATA_NAME, "wb") as data:
        for rec in docs:
            if schema is None:
                schema = schema_of(rec)
                _write_meta(directory / META_NAME, 0, 0, schema, complete=False)
            key = rec[0].encode("utf-8")
            if not key or b"\0" in key or len(key) > 0xFFFF:
                raise StorageError(f"unusable doc_id {rec[0]!r}")
            frame = compress(encode_record(rec, schema))
            data.write(frame)
            pending.append((key, offset, len(frame)))
            offset += len(frame)
            max_id = max(max_id, len(key))
            pending_bytes += len(key) + _ENTRY_OVERHEAD
            if pending_bytes > memory_budget:
                runs.append(_spill(pending, tmpdir))
                pending = []
                pending_bytes = 0
        data.flush()
        os.fsync(data.fileno())
    if schema is None:
        raise StorageError("cannot infer schema of an empty corpus; pass schema=")
    pending.sort()
    merged = heapq.merge(*(_read_run(r) for r in runs), iter(pending)) if runs else iter(pending)

    count = 0
    dropped = 0
    prev = None
    pad = max_id
    with open(directory / INDEX_NAME, "wb") as index:
        buf = []
        for key, off, ln in merged:
            if key == prev:
                if not keep_first:
                    raise DuplicateDocId(key.decode("utf-8"))
                dropped += 1
                continue
            prev = key
            buf.append(key.ljust(pad, b"\0") + struct.pack("<QI", off, ln))
            count += 1
            if len(buf) >= 4096:
                index.write(b"".join(buf))
                buf = []
        index.write(b"".join(buf))
        index.flush()
        os.fsync(index.fileno())
    return count, dropped, schema, max_id


class _LRU:
    def __init__(self, capacity):
        self.capacity = capacity
        self._data = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key):
        with self._lock:
            value = self._data.get(key)
            if value is not None:
                self._data.move_to_end(key)
            return value

    def put(self, key, value):
        if self.capacity <= 0:
            return
        with self._lock:
            self._data[key] = value
            self._data.move_to_end(key)
            while len(self._data) > self.capacity:
                self._data.popitem(last=False)

    def clear(self):
        with self._lock:
            self._data.clear()

    def __len__(self):
        return len(self._data)


class Docstore:
    """Read side of a built store. Safe for concurrent readers."""

    def __init__(self, directory, cache_size=DEFAULT_CACHE_SIZE):
        from . import kernels  # deferred: numba import is heavy

        self._kernels = kernels
        self.directory = Path(directory)
        meta_path = self.directory / META_NAME
        if not meta_path.exists():
            raise IncompleteStore(f"{self.directory}: no store here")
        meta = read_meta(meta_path)
        if not meta["complete"]:
            raise IncompleteStore(f"{self.directory}: build did not complete")
        self.schema = meta["schema"]
        self._count = meta["count"]
        self.max_id_len = meta["max_id_len"]
        width = self.max_id_len + ENTRY_TAIL
        index_path = self.directory / INDEX_NAME
        if index_path.stat().st_size != self._count * width:
            raise StorageError(f"{index_path}: size does not match meta count")
        if self._count:
            raw = np.memmap(index_path, dtype=np.uint8, mode="r", shape=(self._count, width))
        else:
            raw = np.zeros((0, width), dtype=np.uint8)
        self._ids = raw[:, :self.max_id_len]
        tail = np.ascontiguousarray(raw[:, self.max_id_len:]) if self._count else raw[:, self.max_id_len:]
        self._offsets = tail[:, :8].copy().view("<u8").reshape(-1)
        self._lengths = tail[:, 8:].copy().view("<u4").reshape(-1)
        self._fd = os.open(self.directory / DATA_NAME, os.O_RDONLY)
        self._data_size = os.fstat(self._fd).st_size
        if self._count and int((self._offsets + self._lengths).max()) > self._data_size:
            raise StorageError("index points past the end of the data file")
        self._order = None
        self.cache = _LRU(cache_size)
        self.dropped = 0
        self.probes = 0
        self.last_probes = 0
        self.decoded = 0
        self._stat_lock = threading.Lock()

    # -- lookup --------------------------------------------------------

    def __len__(self):
        return self._count

    def count(self) -> int:
        return self._count

    def _find(self, doc_id: str) -> int:
        key = doc_id.encode("utf-8")
        if not key or len(key) > self.max_id_len or b"\0" in key or not self._count:
            self.last_probes = 0
            return -1
        padded = np.frombuffer(key.ljust(self.max_id_len, b"\0"), dtype=np.uint8)
        row, probes = self._kernels.search_fixed(self._ids, padded)
        with self._stat_lock:
            self.last_probes = int(probes)
            self.probes += int(probes)
        return int(row)

    def _read_row(self, row):
        off = int(self._offsets[row])
        ln = int(self._lengths[row])
        return self._decode(os.pread(self._fd, ln, off))

    def _decode(self, frame):
        rec = decode_record(lz4.frame.decompress(frame), self.schema)
        with self._stat_lock:
            self.decoded += 1
        return rec

    def get(self, doc_id: str):
        rec = self.cache.get(doc_id)
        if rec is not None:
            return rec
        row = self._find(doc_id)
        if row < 0:
            raise DocNotFound(doc_id)
        rec = self._read_row(row)
        self.cache.put(doc_id, rec)
        return rec

    def get_many(self, doc_ids) -> dict:
        found = {}
        for doc_id in doc_ids:
            if doc_id in found:
                continue
            try:
                found[doc_id] = self.get(doc_id)
            except DocNotFound:
                pass
        return found

    def get_many_iter(self, doc_ids) -> Iterator:
        """Yield each found document once, in data-file order."""
        rows = {}
        for doc_id in dict.fromkeys(doc_ids):
            cached = self.cache.get(doc_id)
            row = self._find(doc_id)
            if row >= 0:
                rows[row] = cached
        for row in sorted(rows, key=lambda r: int(self._offsets[r])):
            rec = rows[row]
            if rec is None:
                rec = self._read_row(row)
                self.cache.put(rec[0], rec)
            yield rec

    def offset_of(self, doc_id: str) -> int | None:
        row = self._find(doc_id)
        return None if row < 0 else int(self._offsets[row])

    # -- positional access (data-file order) ---------------------------

    @property
    def order(self):
        if self._order is None:
            self._order = np.argsort(self._offsets, kind="stable")
        return self._order

    def read_positions(self, positions: range, batch_bytes=1 << 20) -> Iterator:
        """Decode exactly the records at ``positions`` (data-file order).

        Contiguous runs are fetched with one read per ``batch_bytes`` window.
        """
        if not len(positions):
            return
        order = self.order
        rows = order[positions.start:positions.stop:positions.step] if positions.step > 0 else order[list(positions)]
        offs = self._offsets[rows]
        lens = self._lengths[rows]
        i = 0
        n = len(rows)
        while i < n:
            start = int(offs[i])
            j = i
            end = start
            while j < n and int(offs[j]) == end and end - start < batch_bytes:
                end += int(lens[j])
                j += 1
            if j == i:
                j = i + 1
                end = start + int(lens[i])
            blob = os.pread(self._fd, end - start, start)
            for k in range(i, j):
                a = int(offs[k]) - start
                yield self._decode(blob[a:a + int(lens[k])])
            i = j

    def __iter__(self):
        return self.read_positions(range(self._count))

    def close(self):
        if self._fd is not None:
            os.close(self._fd)
            self._fd = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


def open_or_build(directory, docs_factory, **kwargs) -> Docstore:
    """Open the store in ``directory``, (re)building it from
    ``docs_factory()`` when it is missing or was left incomplete."""
    cache_size = kwargs.get("cache_size", DEFAULT_CACHE_SIZE)
    try:
        return Docstore(directory, cache_size=cache_size)
    except IncompleteStore:
        pass
    return build(docs_factory(), directory, **kwargs)


def store_size(directory) -> dict:
    directory = Path(directory)
    sizes = {name: (directory / name).stat().st_size for name in (DATA_NAME, INDEX_NAME, META_NAME)}
    sizes["total"] = sum(sizes.values())
    return sizes
