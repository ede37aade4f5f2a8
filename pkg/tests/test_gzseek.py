import gzip
import os
import random
import shutil
import struct
import zlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irdatakit.errors import CorruptGzip, DocNotFound, IndexMismatch, OutOfRange
from irdatakit.gzseek import (MAGIC, MIN_INTERVAL, WINDOW, CheckpointIndex, FetchCache,
                              GzipDocstore, GzipSeeker, build_checkpoints, checkpoint_path,
                              load_or_build, read_at)

MiB = 1 << 20


def text_bytes(n, seed=0):
    rng = random.Random(seed)
    words = [f"w{i}" for i in range(2000)]
    out = []
    size = 0
    while size < n:
        chunk = " ".join(rng.choices(words, k=2000)) + "\n"
        out.append(chunk)
        size += len(chunk)
    return "".join(out).encode()[:n]


@pytest.fixture(scope="module")
def ten_mib(tmp_path_factory):
    d = tmp_path_factory.mktemp("gz")
    data = text_bytes(10 * MiB, seed=1)
    path = d / "ten.gz"
    path.write_bytes(gzip.compress(data, 6))
    return path, data


def test_ten_mib_one_mib_interval(ten_mib):
    path, data = ten_mib
    index = build_checkpoints(path, MiB)
    assert 9 <= len(index.checkpoints) <= 11
    assert index.total_uncompressed == len(gzip.decompress(path.read_bytes()))
    offs = [c.uncomp_offset for c in index.checkpoints]
    assert offs == sorted(set(offs)) and offs[0] == 0
    gaps = [b - a for a, b in zip(offs, offs[1:] + [index.total_uncompressed])]
    assert max(gaps) <= 2 * MiB
    assert all(len(c.window) == WINDOW and 0 <= c.comp_bit < 8 for c in index.checkpoints)


def test_checkpoint_window_is_preceding_output(ten_mib):
    path, data = ten_mib
    index = build_checkpoints(path, MiB)
    for c in index.checkpoints[1:]:
        assert c.window == data[c.uncomp_offset - WINDOW:c.uncomp_offset]


def test_read_at_cases(ten_mib):
    path, data = ten_mib
    index = build_checkpoints(path, MiB)
    s = GzipSeeker(path, index)
    assert s.read_at(0, 100) == data[:100]
    s.bytes_read = 0
    total = index.total_uncompressed
    assert s.read_at(total - 10, 10) == data[-10:]
    assert s.bytes_read < 0.10 * os.path.getsize(path)
    with pytest.raises(OutOfRange):
        s.read_at(total, 1)
    with pytest.raises(OutOfRange):
        s.read_at(-1, 5)
    assert s.read_at(total, 0) == b""
    rng = random.Random(4)
    for _ in range(30):
        off = rng.randrange(total)
        ln = min(rng.randrange(1, 3 * MiB), total - off)
        assert s.read_at(off, ln) == data[off:off + ln]


def test_interval_chunks_reconstruct(ten_mib):
    path, data = ten_mib
    index = build_checkpoints(path, 2 * MiB)
    parts = [read_at(path, index, o, min(2 * MiB, len(data) - o))
             for o in range(0, len(data), 2 * MiB)]
    assert b"".join(parts) == data


def test_small_file_and_empty(tmp_path):
    p = tmp_path / "small.gz"
    p.write_bytes(gzip.compress(b"tiny payload"))
    index = build_checkpoints(p, MIN_INTERVAL)
    assert len(index.checkpoints) in (0, 1)
    assert read_at(p, index, 5, 7) == b"payload"
    e = tmp_path / "empty.gz"
    e.write_bytes(gzip.compress(b""))
    index = build_checkpoints(e, MIN_INTERVAL)
    assert index.total_uncompressed == 0
    assert read_at(e, index, 0, 0) == b""


def test_interval_minimum(tmp_path):
    p = tmp_path / "x.gz"
    p.write_bytes(gzip.compress(b"x"))
    with pytest.raises(ValueError):
        build_checkpoints(p, 1024)


def test_multi_member_and_padding(tmp_path):
    parts = [text_bytes(300_000, seed=s) for s in range(3)] + [b"", b"tail"]
    blob = b"".join(gzip.compress(x, 1) for x in parts) + b"\0" * 16
    p = tmp_path / "multi.gz"
    p.write_bytes(blob)
    data = b"".join(parts)
    index = build_checkpoints(p, MIN_INTERVAL)
    assert index.total_uncompressed == len(data)
    assert sum(c.member_start for c in index.checkpoints) >= 3
    s = GzipSeeker(p, index)
    boundary = len(parts[0])
    assert s.read_at(boundary - 50, 100) == data[boundary - 50:boundary + 50]
    assert s.read_at(0, len(data)) == data


def test_stored_and_fixed_blocks(tmp_path):
    raw = random.Random(2).randbytes(400_000)  # incompressible: stored blocks
    c = zlib.compressobj(6, zlib.DEFLATED, 31, 8, zlib.Z_FIXED)
    text = text_bytes(400_000)
    p1, p2 = tmp_path / "stored.gz", tmp_path / "fixed.gz"
    p1.write_bytes(gzip.compress(raw, 6))
    p2.write_bytes(c.compress(text) + c.flush())
    for path, data in ((p1, raw), (p2, text)):
        index = build_checkpoints(path, MIN_INTERVAL)
        assert len(index.checkpoints) > 2
        s = GzipSeeker(path, index)
        for off in (0, 70_000, 250_001, len(data) - 3):
            assert s.read_at(off, 3) == data[off:off + 3]


def test_corrupt_inputs(tmp_path):
    good = gzip.compress(text_bytes(200_000), 6)
    cases = {
        "magic": b"PK" + good[2:],
        "truncated": good[: len(good) // 2],
        "crc": good[:-8] + bytes(8),
        "garbage_tail": good + b"not gzip",
    }
    for name, blob in cases.items():
        p = tmp_path / f"{name}.gz"
        p.write_bytes(blob)
        with pytest.raises(CorruptGzip):
            build_checkpoints(p, MIN_INTERVAL)


def test_index_mismatch(tmp_path):
    p = tmp_path / "a.gz"
    p.write_bytes(gzip.compress(b"one" * 1000))
    index = build_checkpoints(p, MIN_INTERVAL)
    p.write_bytes(gzip.compress(b"two" * 1000))
    with pytest.raises(IndexMismatch):
        GzipSeeker(p, index)


def test_chk_roundtrip_and_layout(ten_mib, tmp_path):
    path, _ = ten_mib
    index = build_checkpoints(path, MiB)
    out = tmp_path / "ten.gz.chk"
    index.save(out)
    raw = out.read_bytes()
    assert raw[:5] == MAGIC and raw[5] == 1
    assert raw[6:38] == bytes.fromhex(index.source_sha256)
    interval, count = struct.unpack_from("<QQ", raw, 38)
    assert (interval, count) == (MiB, len(index.checkpoints))
    back = CheckpointIndex.load(out)
    assert back.checkpoints == index.checkpoints
    assert back.total_uncompressed == index.total_uncompressed
    # compressed windows keep even this dense (1 MiB) index small
    assert len(raw) < 0.05 * os.path.getsize(path)


def test_load_or_build_reuses_and_rebuilds(tmp_path):
    p = tmp_path / "c.gz"
    p.write_bytes(gzip.compress(text_bytes(300_000)))
    first = load_or_build(p, MIN_INTERVAL)
    assert checkpoint_path(p).exists()
    mtime = checkpoint_path(p).stat().st_mtime_ns
    again = load_or_build(p, MIN_INTERVAL)
    assert checkpoint_path(p).stat().st_mtime_ns == mtime
    assert again.checkpoints == first.checkpoints
    p.write_bytes(gzip.compress(text_bytes(100_000, seed=9)))
    assert load_or_build(p, MIN_INTERVAL).source_sha256 != first.source_sha256


class CountingOpen:
    def __init__(self, monkeypatch, target):
        self.count = 0
        import builtins

        real = builtins.open
        outer = self

        def patched(file, *a, **kw):
            if os.fspath(file) == os.fspath(target):
                outer.count += 1
            return real(file, *a, **kw)

        monkeypatch.setattr(builtins, "open", patched)


def test_cached_fetch(tmp_path, monkeypatch):
    data = text_bytes(600_000, seed=3)
    p = tmp_path / "src.gz"
    p.write_bytes(gzip.compress(data))
    index = build_checkpoints(p, MIN_INTERVAL)
    cache = FetchCache(tmp_path / "cache")
    cache.register("src", p, index)
    seeker = cache.seeker("src")
    assert cache.cached_fetch("src", 1000, 50) == data[1000:1050]
    assert cache.cached_fetch("src", 400_000, 70) == data[400_000:400_070]
    before = seeker.bytes_read
    opens = CountingOpen(monkeypatch, p)
    assert cache.cached_fetch("src", 1000, 50) == data[1000:1050]
    assert cache.cached_fetch("src", 400_000, 70) == data[400_000:400_070]
    assert seeker.bytes_read == before and opens.count == 0
    cache.clear()
    assert cache.cached_fetch("src", 1000, 50) == data[1000:1050]
    assert opens.count == 1


def test_gzip_docstore(tmp_path):
    docs = [f"<DOC>\n<DOCNO> D{i} </DOCNO>\n<TEXT>\nbody {i} {'x' * (i % 50)}\n</TEXT>\n</DOC>\n"
            for i in range(300)]
    p = tmp_path / "docs.sgml.gz"
    p.write_bytes(gzip.compress("".join(docs).encode()))
    store = GzipDocstore(p, tmp_path / "store", interval=MIN_INTERVAL)
    assert store.count() == 300
    assert store.get("D123").text.strip().startswith("body 123")
    with pytest.raises(DocNotFound):
        store.get("D999")
    assert set(store.get_many(["D1", "D2", "nope"])) == {"D1", "D2"}
    assert [d.doc_id for d in store.read_positions(range(295, 300))] == [f"D{i}" for i in range(295, 300)]
    assert [d.doc_id for d in store.get_many_iter(["D9", "D3"])] == ["D3", "D9"]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10 * MiB - 1), st.integers(0, 70_000)), min_size=1,
                max_size=5))
def test_random_slices_property(ten_mib, pairs):
    path, data = ten_mib
    index = _cached_index(path)
    s = GzipSeeker(path, index)
    for off, ln in pairs:
        ln = min(ln, len(data) - off)
        assert s.read_at(off, ln) == data[off:off + ln]


_INDEX = {}


def _cached_index(path):
    if path not in _INDEX:
        _INDEX[path] = build_checkpoints(path, MiB)
    return _INDEX[path]
