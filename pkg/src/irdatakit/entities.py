"""Record and schema model for the five IR entity types.

A :class:`Schema` owns a generated ``namedtuple`` class; records are plain
instances of that class, so they are immutable, hashable, comparable and
print like ``GenericDoc(doc_id='16', text='...')``.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Any, Iterable, Sequence

from .errors import SchemaViolation, UnknownField

ENTITY_TYPES = ("docs", "queries", "qrels", "scoreddocs", "docpairs")


class Kind(str, Enum):
    ID = "id_string"
    TEXT = "text"
    INT = "integer"
    FLOAT = "float"
    ID_LIST = "id_string_list"

    def check(self, value) -> str | None:
        """Return a reason string if ``value`` is not of this kind."""
        if self in (Kind.ID, Kind.TEXT):
            if not isinstance(value, str):
                return f"expected str, got {type(value).__name__}"
            return _unicode_problem(value)
        if self is Kind.INT:
            if isinstance(value, bool) or not isinstance(value, int):
                return f"expected int, got {type(value).__name__}"
            return None
        if self is Kind.FLOAT:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                return f"expected float, got {type(value).__name__}"
            return None
        if not isinstance(value, tuple):
            return f"expected tuple of str, got {type(value).__name__}"
        for item in value:
            if not isinstance(item, str):
                return "expected tuple of str"
            problem = _unicode_problem(item)
            if problem:
                return problem
        return None

    def from_text(self, text: str):
        if self is Kind.INT:
            return int(text)
        if self is Kind.FLOAT:
            value = float(text)
            if math.isnan(value) and text.strip().lower() not in ("nan", "+nan", "-nan"):
                raise ValueError(text)
            return value
        if self is Kind.ID_LIST:
            return tuple(text.split())
        return text

    def to_text(self, value) -> str:
        if self is Kind.FLOAT:
            return repr(float(value))
        if self is Kind.INT:
            return str(value)
        if self is Kind.ID_LIST:
            return " ".join(value)
        return value


def _unicode_problem(text: str) -> str | None:
    try:
        text.encode("utf-8")
    except UnicodeEncodeError:
        return "text is not valid Unicode (lone surrogate)"
    return None


@dataclass(frozen=True)
class FieldSpec:
    name: str
    kind: Kind

    def __post_init__(self):
        if not self.name or not self.name.isidentifier():
            raise ValueError(f"invalid field name {self.name!r}")
        object.__setattr__(self, "kind", Kind(self.kind))


class Schema:
    """Ordered field specification for one record class."""

    def __init__(self, name: str, entity_type: str, fields: Iterable,
                 *, derived: bool = False):
        if entity_type not in ENTITY_TYPES:
            raise ValueError(f"unknown entity type {entity_type!r}")
        specs = tuple(f if isinstance(f, FieldSpec) else FieldSpec(*f) for f in fields)
        names = [f.name for f in specs]
        if not specs:
            raise ValueError("schema needs at least one field")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate field names in {names}")
        self.name = name
        self.entity_type = entity_type
        self.fields = specs
        self.derived = derived
        if not derived:
            _check_conventions(entity_type, specs)
        self.record_cls = namedtuple(name, names)
        self.record_cls._schema = self
        self._positions = {n: i for i, n in enumerate(names)}

    @property
    def field_names(self) -> tuple[str, ...]:
        return self.record_cls._fields

    def __call__(self, *values, **kwargs):
        return self.record_cls(*values, **kwargs)

    def position(self, name: str) -> int:
        try:
            return self._positions[name]
        except KeyError:
            raise UnknownField(name) from None

    def kind_of(self, name: str) -> Kind:
        return self.fields[self.position(name)].kind

    def derive(self, field_names: Sequence[str]) -> Schema:
        return _derive(self, tuple(field_names))

    def descriptor(self) -> dict:
        desc = {
            "name": self.name,
            "entity_type": self.entity_type,
            "fields": [[f.name, f.kind.value] for f in self.fields],
        }
        if self.derived:
            desc["derived"] = True
        return desc

    @classmethod
    def from_descriptor(cls, desc: dict) -> Schema:
        return cls(desc["name"], desc["entity_type"],
                   [FieldSpec(n, Kind(k)) for n, k in desc["fields"]],
                   derived=desc.get("derived", False))

    def _key(self):
        return (self.name, self.entity_type, self.fields)

    def __eq__(self, other):
        return isinstance(other, Schema) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        cols = ", ".join(f"{f.name}: {f.kind.value}" for f in self.fields)
        return f"Schema({self.name}[{self.entity_type}]: {cols})"


def _check_conventions(entity_type, specs):
    by_name = {f.name: f.kind for f in specs}

    def need(name, kind):
        if by_name.get(name) is not kind:
            raise ValueError(f"{entity_type} schema needs field {name} ({kind.value})")

    if entity_type in ("docs", "queries"):
        first = "doc_id" if entity_type == "docs" else "query_id"
        if specs[0].name != first or specs[0].kind is not Kind.ID:
            raise ValueError(f"{entity_type} schema must start with {first} (id_string)")
    elif entity_type == "qrels":
        need("query_id", Kind.ID)
        need("doc_id", Kind.ID)
        need("relevance", Kind.INT)
    elif entity_type == "scoreddocs":
        need("query_id", Kind.ID)
        need("doc_id", Kind.ID)
        need("score", Kind.FLOAT)
    else:
        need("query_id", Kind.ID)
        doc_fields = [f for f in specs if f.name.startswith("doc_id") and f.kind is Kind.ID]
        if len(doc_fields) < 2:
            raise ValueError("docpairs schema needs at least two doc_id fields")


@lru_cache(maxsize=256)
def _derive(schema: Schema, names: tuple) -> Schema:
    if names == schema.field_names:
        return schema
    specs = [schema.fields[schema.position(n)] for n in names]
    return Schema(schema.name, schema.entity_type, specs, derived=True)


def schema_of(record) -> Schema:
    schema = getattr(record, "_schema", None)
    if not isinstance(schema, Schema):
        raise SchemaViolation("<record>", "object carries no schema")
    return schema


def validate(record) -> None:
    """Raise :class:`SchemaViolation` unless ``record`` fits its schema."""
    schema = schema_of(record)
    if len(record) != len(schema.fields):
        raise SchemaViolation(
            "<record>", f"expected {len(schema.fields)} values, got {len(record)}")
    for spec, value in zip(schema.fields, record):
        reason = spec.kind.check(value)
        if reason:
            raise SchemaViolation(spec.name, reason)


def make_record(schema: Schema, values: Sequence[Any]):
    """Build a record from a raw value sequence without coercion.

    Unlike ``schema(*values)`` this never raises ``TypeError`` on a wrong
    arity, so the result can be handed to :func:`validate`.
    """
    return tuple.__new__(schema.record_cls, values)


def project(record, field_names: Sequence[str]):
    schema = schema_of(record)
    target = schema.derive(field_names)
    if target is schema:
        return record
    return target.record_cls._make(record[schema.position(n)] for n in field_names)


def coerce(schema: Schema, texts: Sequence[str]):
    """Record from textual values, converting each per its field kind."""
    return schema.record_cls._make(
        spec.kind.from_text(t) for spec, t in zip(schema.fields, texts))


GenericDoc = Schema("GenericDoc", "docs", [("doc_id", Kind.ID), ("text", Kind.TEXT)])
GenericQuery = Schema("GenericQuery", "queries", [("query_id", Kind.ID), ("text", Kind.TEXT)])
TrecQuery = Schema("TrecQuery", "queries", [
    ("query_id", Kind.ID), ("title", Kind.TEXT),
    ("description", Kind.TEXT), ("narrative", Kind.TEXT)])
TrecQrel = Schema("TrecQrel", "qrels", [
    ("query_id", Kind.ID), ("iteration", Kind.ID),
    ("doc_id", Kind.ID), ("relevance", Kind.INT)])
GenericScoredDoc = Schema("GenericScoredDoc", "scoreddocs", [
    ("query_id", Kind.ID), ("doc_id", Kind.ID), ("score", Kind.FLOAT)])
TrecScoredDoc = Schema("TrecScoredDoc", "scoreddocs", [
    ("query_id", Kind.ID), ("doc_id", Kind.ID), ("rank", Kind.INT),
    ("score", Kind.FLOAT), ("tag", Kind.ID)])
GenericDocPair = Schema("GenericDocPair", "docpairs", [
    ("query_id", Kind.ID), ("doc_id_a", Kind.ID), ("doc_id_b", Kind.ID)])
