"""Streaming readers and writers for the formats IR collections ship in.

Every parser accepts a binary or text stream and yields records lazily, so
memory stays bounded by the largest single record. Binary streams are decoded
per line; malformed bytes become U+FFFD and are tallied in :class:`ParseStats`.
"""

from __future__ import annotations

import csv
import gzip
import io
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterator

from .entities import (GenericDoc, Kind, Schema, TrecQrel, TrecQuery,
                       TrecScoredDoc, schema_of)
from .errors import ParseError, UnsupportedFormat

FORMATS = ("tsv", "jsonl", "trec")
_REPLACEMENT = "�"
_REPLACEMENT_BYTES = _REPLACEMENT.encode("utf-8")
_TSV_ESCAPE = str.maketrans({"\t": " ", "\n": " ", "\r": " "})


@dataclass
class ParseContext:
    source_name: str
    line_number: int = 0
    byte_offset: int = 0


@dataclass
class ParseStats:
    lines: int = 0
    records: int = 0
    replaced_chars: int = 0


def _decode(raw: bytes, encoding: str, stats: ParseStats | None) -> str:
    try:
        return raw.decode(encoding)
    except UnicodeDecodeError:
        text = raw.decode(encoding, errors="replace")
        if stats is not None:
            stats.replaced_chars += text.count(_REPLACEMENT) - raw.count(_REPLACEMENT_BYTES)
        return text


def _source_name(stream, default="<stream>"):
    return str(getattr(stream, "name", default))


def _lines(stream, source_name, encoding, stats) -> Iterator[tuple[ParseContext, str]]:
    """Yield ``(context, line)`` with the line terminator removed.

    For text streams ``byte_offset`` counts characters, not bytes.
    """
    ctx = ParseContext(source_name or _source_name(stream))
    offset = 0
    for number, raw in enumerate(stream, start=1):
        ctx.line_number = number
        ctx.byte_offset = offset
        offset += len(raw)
        if isinstance(raw, bytes):
            line = _decode(raw, encoding, stats)
        else:
            line = raw
        if stats is not None:
            stats.lines += 1
        if line.endswith("\n"):
            line = line[:-1]
        if line.endswith("\r"):
            line = line[:-1]
        yield ctx, line


def _coerce_fields(schema: Schema, values, ctx):
    try:
        return schema.record_cls._make(
            spec.kind.from_text(v) for spec, v in zip(schema.fields, values))
    except ValueError as exc:
        raise ParseError(ctx, f"cannot convert value: {exc}") from None


def parse_tsv(stream, schema: Schema, *, source_name=None, encoding="utf-8",
              stats: ParseStats | None = None, delimiter="\t"):
    k = len(schema.fields)
    for ctx, line in _lines(stream, source_name, encoding, stats):
        if not line:
            continue
        values = line.split(delimiter)
        if len(values) != k:
            raise ParseError(ctx, f"field count mismatch: expected {k}, got {len(values)}")
        rec = _coerce_fields(schema, values, ctx)
        if stats is not None:
            stats.records += 1
        yield rec


def parse_csv(stream, schema: Schema, *, header=True, source_name=None,
              encoding="utf-8", stats: ParseStats | None = None):
    """RFC-4180 CSV. With ``header`` the schema fields are picked by column
    name (extra columns ignored); otherwise rows must have exactly one value
    per field."""
    if _is_binary(stream):
        stream = io.TextIOWrapper(stream, encoding=encoding, errors="replace", newline="")
    ctx = ParseContext(source_name or _source_name(stream))
    reader = csv.reader(stream)
    columns = None
    if header:
        head = next(reader, None)
        if head is None:
            return
        try:
            columns = [head.index(name) for name in schema.field_names]
        except ValueError:
            missing = [n for n in schema.field_names if n not in head]
            raise ParseError(ctx, f"missing field {missing[0]}") from None
    k = len(schema.fields)
    for row in reader:
        ctx.line_number = reader.line_num
        if not row:
            continue
        if stats is not None:
            stats.lines += 1
        if columns is not None:
            if len(row) < len(head):
                raise ParseError(ctx, f"field count mismatch: expected {len(head)}, got {len(row)}")
            values = [row[c] for c in columns]
        else:
            if len(row) != k:
                raise ParseError(ctx, f"field count mismatch: expected {k}, got {len(row)}")
            values = row
        rec = _coerce_fields(schema, values, ctx)
        if stats is not None:
            stats.records += 1
        yield rec


def parse_trec_qrels(stream, *, source_name=None, encoding="utf-8",
                     stats: ParseStats | None = None):
    for ctx, line in _lines(stream, source_name, encoding, stats):
        cols = line.split()
        if not cols:
            continue
        if len(cols) != 4:
            raise ParseError(ctx, f"expected 4 columns, got {len(cols)}")
        try:
            rel = int(cols[3])
        except ValueError:
            raise ParseError(ctx, f"relevance {cols[3]!r} is not an integer") from None
        if stats is not None:
            stats.records += 1
        yield TrecQrel.record_cls(cols[0], cols[1], cols[2], rel)


def parse_trec_run(stream, *, source_name=None, encoding="utf-8",
                   stats: ParseStats | None = None):
    for ctx, line in _lines(stream, source_name, encoding, stats):
        cols = line.split()
        if not cols:
            continue
        if len(cols) != 6:
            raise ParseError(ctx, f"expected 6 columns, got {len(cols)}")
        qid, _q0, did, rank, score, tag = cols
        try:
            rank = int(rank)
            score = Kind.FLOAT.from_text(score)
        except ValueError as exc:
            raise ParseError(ctx, f"bad rank/score: {exc}") from None
        if stats is not None:
            stats.records += 1
        yield TrecScoredDoc.record_cls(qid, did, rank, score, tag)


def _json_value(kind: Kind, value, name, ctx):
    if kind in (Kind.ID, Kind.TEXT):
        if isinstance(value, str):
            return value
        if kind is Kind.ID and isinstance(value, int) and not isinstance(value, bool):
            return str(value)
    elif kind is Kind.INT:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                pass
    elif kind is Kind.FLOAT:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif isinstance(value, list) and all(isinstance(v, str) for v in value):
        return tuple(value)
    raise ParseError(ctx, f"field {name} is not {kind.value}: {value!r}")


def parse_jsonl(stream, schema: Schema, *, source_name=None, encoding="utf-8",
                stats: ParseStats | None = None):
    for ctx, line in _lines(stream, source_name, encoding, stats):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(ctx, f"malformed JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise ParseError(ctx, "expected a JSON object")
        values = []
        for spec in schema.fields:
            if spec.name not in obj:
                raise ParseError(ctx, f"missing field {spec.name}")
            values.append(_json_value(spec.kind, obj[spec.name], spec.name, ctx))
        if stats is not None:
            stats.records += 1
        yield schema.record_cls._make(values)


# TREC SGML --------------------------------------------------------------

_TAG = re.compile(rb"<[^>]*>")
_DOCNO = re.compile(rb"<DOCNO>(.*?)</DOCNO>", re.S)
_DOC_OPEN = b"<DOC>"
_DOC_CLOSE = b"</DOC>"


def parse_trec_doc_block(block: bytes, *, encoding="utf-8", ctx=None,
                         stats: ParseStats | None = None):
    """One ``<DOC>...</DOC>`` byte block to a ``GenericDoc`` record."""
    inner = block[len(_DOC_OPEN):len(block) - len(_DOC_CLOSE)]
    m = _DOCNO.search(inner)
    if m is None:
        raise ParseError(ctx, "DOC block without DOCNO")
    doc_id = _decode(m.group(1), encoding, stats).strip()
    body = inner[:m.start()] + inner[m.end():]
    text = _decode(_TAG.sub(b"", body), encoding, stats)
    return GenericDoc.record_cls(doc_id, text)


def iter_trec_doc_spans(stream, *, source_name=None, encoding="utf-8",
                        stats: ParseStats | None = None, chunk_size=1 << 16):
    """Yield ``(record, start, end)`` with the byte span of each DOC block."""
    if not _is_binary(stream):
        stream = _EncodedReader(stream)
    ctx = ParseContext(source_name or _source_name(stream))
    buf = b""
    base = 0  # absolute offset of buf[0]
    line = 1
    eof = False
    while True:
        start = buf.find(_DOC_OPEN)
        if start < 0:
            if eof:
                return
            keep = len(_DOC_OPEN) - 1
            dropped = buf[:max(0, len(buf) - keep)]
            line += dropped.count(b"\n")
            base += len(dropped)
            buf = buf[len(dropped):]
            chunk = stream.read(chunk_size)
            if not chunk:
                eof = True
            buf += chunk
            continue
        end = buf.find(_DOC_CLOSE, start + len(_DOC_OPEN))
        if end < 0:
            if eof:
                ctx.line_number = line + buf.count(b"\n", 0, start)
                ctx.byte_offset = base + start
                raise ParseError(ctx, "<DOC> without </DOC> before end of input")
            chunk = stream.read(chunk_size)
            if not chunk:
                eof = True
            buf += chunk
            continue
        end += len(_DOC_CLOSE)
        line += buf.count(b"\n", 0, start)
        ctx.line_number = line
        ctx.byte_offset = base + start
        rec = parse_trec_doc_block(buf[start:end], encoding=encoding, ctx=ctx, stats=stats)
        if stats is not None:
            stats.records += 1
        yield rec, base + start, base + end
        line += buf.count(b"\n", start, end)
        base += end
        buf = buf[end:]


def parse_trec_docs(stream, *, source_name=None, encoding="utf-8",
                    stats: ParseStats | None = None):
    for rec, _, _ in iter_trec_doc_spans(stream, source_name=source_name,
                                         encoding=encoding, stats=stats):
        yield rec


_TOPIC = re.compile(r"<top>(.*?)</top>", re.S | re.I)
_TOPIC_FIELD = re.compile(r"<(num|title|desc|narr)>", re.I)
_TOPIC_PREFIX = {"num": "Number:", "desc": "Description:", "narr": "Narrative:"}


def parse_trec_topics(stream, *, source_name=None, encoding="utf-8",
                      stats: ParseStats | None = None):
    """Classic ``<top>`` topic files (unclosed ``<num>``/``<title>``/... tags)."""
    ctx = ParseContext(source_name or _source_name(stream))
    buf = []
    inside = False
    for lctx, line in _lines(stream, source_name, encoding, stats):
        low = line.lower()
        if "<top>" in low:
            inside = True
            ctx.line_number = lctx.line_number
            ctx.byte_offset = lctx.byte_offset
            buf = []
        if inside:
            buf.append(line)
        if inside and "</top>" in low:
            inside = False
            rec = _topic_record("\n".join(buf), ctx)
            if stats is not None:
                stats.records += 1
            yield rec
    if inside:
        raise ParseError(ctx, "<top> without </top> before end of input")


def _topic_record(block, ctx):
    m = _TOPIC.search(block)
    body = m.group(1) if m else block
    parts = {}
    marks = list(_TOPIC_FIELD.finditer(body))
    for i, mark in enumerate(marks):
        stop = marks[i + 1].start() if i + 1 < len(marks) else len(body)
        tag = mark.group(1).lower()
        value = re.sub(r"</(num|title|desc|narr)>", "", body[mark.end():stop], flags=re.I).strip()
        prefix = _TOPIC_PREFIX.get(tag)
        if prefix and value.lower().startswith(prefix.lower()):
            value = value[len(prefix):].strip()
        parts[tag] = value
    if not parts.get("num"):
        raise ParseError(ctx, "topic without <num>")
    return TrecQuery.record_cls(parts["num"], parts.get("title", ""),
                                parts.get("desc", ""), parts.get("narr", ""))


# serialization ----------------------------------------------------------

def serialize(record, fmt: str) -> str:
    """Render one record as a single line (without the trailing newline)."""
    schema = schema_of(record)
    if fmt == "tsv":
        return "\t".join(spec.kind.to_text(v).translate(_TSV_ESCAPE)
                         for spec, v in zip(schema.fields, record))
    if fmt == "jsonl":
        obj = {}
        for spec, v in zip(schema.fields, record):
            obj[spec.name] = list(v) if spec.kind is Kind.ID_LIST else v
        return json.dumps(obj, ensure_ascii=False)
    if fmt == "trec":
        names = schema.field_names
        if schema.entity_type == "qrels" and {"query_id", "doc_id", "relevance"} <= set(names):
            it = record.iteration if "iteration" in names else "0"
            return f"{record.query_id} {it} {record.doc_id} {record.relevance}"
        if schema.entity_type == "scoreddocs" and {"query_id", "doc_id", "score"} <= set(names):
            rank = record.rank if "rank" in names else 0
            tag = record.tag if "tag" in names else "run"
            return f"{record.query_id} Q0 {record.doc_id} {rank} {Kind.FLOAT.to_text(record.score)} {tag}"
        raise UnsupportedFormat(schema.entity_type, fmt)
    raise UnsupportedFormat(schema.entity_type, fmt)


def fix_double_encoding(text: str) -> str:
    """Undo UTF-8 text that was mis-decoded as Latin-1 (``cafÃ©`` -> ``café``).

    Applied only when every code point fits in one byte and those bytes form
    valid UTF-8; anything else is returned untouched.
    """
    if text.isascii():
        return text
    try:
        return text.encode("latin-1").decode("utf-8")
    except (UnicodeEncodeError, UnicodeDecodeError):
        return text


# sources ------------------------------------------------------------------

def _is_binary(stream) -> bool:
    if isinstance(stream, (io.RawIOBase, io.BufferedIOBase, gzip.GzipFile)):
        return True
    if isinstance(stream, io.TextIOBase):
        return False
    return "b" in getattr(stream, "mode", "b")


class _EncodedReader:
    """Minimal ``read(n) -> bytes`` adapter over a text stream."""

    def __init__(self, text_stream):
        self._s = text_stream
        self.name = _source_name(text_stream)

    def read(self, n):
        return self._s.read(n).encode("utf-8")


def open_source(path) -> IO[bytes]:
    """Open a source file for streaming; ``.gz`` files are decompressed."""
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")
