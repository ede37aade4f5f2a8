"""Dataset registry: hierarchical IDs mapped to lazily evaluated handles.

An ID like ``cord19/trec-covid`` names a benchmark inside a corpus. A child
that defines no docs of its own inherits the docs of the nearest registered
ancestor; a child that does define docs is a separate corpus. Defining docs
on a child whose ancestor already has docs is rejected at registration time.

The built-in entries are small fixture mirrors shipped inside the package and
fetched through the normal download path, so they exercise hashing, licence
notices and manual placement like a real collection would. ``IRDS_MIRROR_URL``
points them at another copy (for example a local HTTP server).
"""

from __future__ import annotations

import os
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

from . import formats
from .entities import (ENTITY_TYPES, GenericDoc, GenericDocPair, GenericQuery,
                       Kind, Schema, TrecQrel, TrecQuery, TrecScoredDoc)
from .errors import FileMissing, UnknownDataset, UnsupportedEntity
from .fetch import DownloadSpec, ensure_file, irds_home
from .slicing import DocsView, IterSource

ID_PATTERN = re.compile(r"^[a-z0-9][a-z0-9._-]*(/[a-z0-9][a-z0-9._-]*)*$")
MIRROR_DIR = Path(__file__).resolve().parent / "mirror"


def valid_id(dataset_id) -> bool:
    return isinstance(dataset_id, str) and bool(ID_PATTERN.match(dataset_id))


def mirror_url() -> str:
    url = os.environ.get("IRDS_MIRROR_URL")
    if url:
        return url.rstrip("/") + "/"
    return MIRROR_DIR.as_uri() + "/"


def home_dir(dataset_id, home=None) -> Path:
    base = Path(home) if home is not None else irds_home()
    return base.joinpath(*dataset_id.split("/"))


@dataclass
class EntityProvider:
    """Schema plus a re-startable iterator factory for one entity type."""

    schema: Schema
    open_iter: Callable[[], Iterator]
    count_hint: int | None = None
    specs: tuple = ()


@dataclass
class DatasetHandle:
    id: str
    providers: dict
    metadata: dict = field(default_factory=dict)
    docstore_factory: Callable | None = None
    docs_owner: str | None = None

    def __post_init__(self):
        if not self.providers:
            raise ValueError(f"{self.id}: a dataset needs at least one entity type")

    # -- introspection ---------------------------------------------------

    def capabilities(self) -> set:
        return set(self.providers)

    def has(self, entity_type) -> bool:
        return entity_type in self.providers

    def provider(self, entity_type) -> EntityProvider:
        try:
            return self.providers[entity_type]
        except KeyError:
            raise UnsupportedEntity(self.id, entity_type) from None

    def schema(self, entity_type) -> Schema:
        return self.provider(entity_type).schema

    @property
    def downloadable(self) -> bool:
        return self.metadata.get("downloadable", True)

    def download_specs(self) -> list:
        seen = {}
        for p in self.providers.values():
            for s in p.specs:
                seen.setdefault(s.dest, s)
        return list(seen.values())

    # -- iteration ---------------------------------------------------------

    def iter(self, entity_type) -> Iterator:
        return self.provider(entity_type).open_iter()

    def docs_iter(self) -> DocsView:
        return DocsView(_DocsSource(self))

    def queries_iter(self):
        return self.iter("queries")

    def qrels_iter(self):
        return self.iter("qrels")

    def scoreddocs_iter(self):
        return self.iter("scoreddocs")

    def docpairs_iter(self):
        return self.iter("docpairs")

    def docs_cls(self):
        return self.schema("docs").record_cls

    def queries_cls(self):
        return self.schema("queries").record_cls

    def qrels_cls(self):
        return self.schema("qrels").record_cls

    def scoreddocs_cls(self):
        return self.schema("scoreddocs").record_cls

    def docpairs_cls(self):
        return self.schema("docpairs").record_cls

    def docs_count(self) -> int | None:
        return self.provider("docs").count_hint

    def docs_store(self, **kwargs):
        """Open (building on first use) the lookup store for this dataset's docs."""
        docs = self.provider("docs")
        if self.docstore_factory is not None:
            return self.docstore_factory(**kwargs)
        from . import docstore

        directory = home_dir(self.docs_owner or self.id) / "docstore"
        return docstore.open_or_build(directory, docs.open_iter, schema=docs.schema, **kwargs)


class _DocsSource:
    """Positional docs source: full scans stream the parser, anything else
    goes through the docs store so skipped records are never decoded."""

    def __init__(self, handle: DatasetHandle):
        self.handle = handle
        self._store = None
        provider = handle.provider("docs")
        self._scan = IterSource(provider.open_iter)

    @property
    def store(self):
        if self._store is None:
            self._store = self.handle.docs_store()
        return self._store

    @property
    def decoded(self):
        return self._scan.decoded + (self._store.decoded if self._store is not None else 0)

    def count(self) -> int:
        return self.store.count()

    def iter_all(self):
        return self._scan.iter_all()

    def read_positions(self, positions: range):
        if positions.start == 0 and positions.step == 1 and positions.stop >= self.count():
            return self._scan.iter_all()
        return self.store.read_positions(positions)


# -- registry table -------------------------------------------------------------

_REGISTRY: dict = {}
_DOCS_OWNERS: dict = {}
_lock = threading.Lock()


@dataclass
class _Entry:
    id: str
    build: Callable[[], DatasetHandle]
    capabilities: frozenset
    downloadable: bool
    description: str


def _ancestors(dataset_id):
    parts = dataset_id.split("/")
    for i in range(len(parts) - 1, 0, -1):
        yield "/".join(parts[:i])


def register(dataset_id: str, handle_or_factory, *, replace=False):
    """Add a dataset to the registry (handle or zero-argument factory)."""
    if not valid_id(dataset_id):
        raise ValueError(f"invalid dataset id {dataset_id!r}")
    factory = handle_or_factory if callable(handle_or_factory) else (lambda: handle_or_factory)
    probe = factory()
    caps = frozenset(probe.providers)
    with _lock:
        if dataset_id in _REGISTRY and not replace:
            raise ValueError(f"{dataset_id} is already registered")
        if "docs" in caps:
            for parent in _ancestors(dataset_id):
                if parent in _DOCS_OWNERS:
                    raise ValueError(f"{dataset_id} would shadow the docs of {parent}")
            _DOCS_OWNERS[dataset_id] = dataset_id
        _REGISTRY[dataset_id] = _Entry(dataset_id, factory, caps, probe.downloadable,
                                       probe.metadata.get("description", ""))


def unregister(dataset_id: str):
    with _lock:
        _REGISTRY.pop(dataset_id, None)
        _DOCS_OWNERS.pop(dataset_id, None)


def _docs_parent(dataset_id):
    for parent in _ancestors(dataset_id):
        if parent in _DOCS_OWNERS:
            return parent
    return None


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def suggestions(dataset_id: str, max_distance=2) -> list:
    scored = sorted((levenshtein(dataset_id, k), k) for k in _REGISTRY)
    return [k for d, k in scored if d <= max_distance]


def load(dataset_id: str) -> DatasetHandle:
    """Handle for a registered ID. Nothing is read or downloaded here."""
    entry = _REGISTRY.get(dataset_id) if valid_id(dataset_id) else None
    if entry is None:
        raise UnknownDataset(dataset_id, suggestions(str(dataset_id)))
    handle = entry.build()
    if "docs" not in handle.providers:
        parent = _docs_parent(dataset_id)
        if parent is not None:
            base = load(parent)
            handle.providers = {"docs": base.providers["docs"], **handle.providers}
            handle.docstore_factory = base.docstore_factory
            handle.docs_owner = base.docs_owner or parent
            if not base.downloadable:
                handle.metadata = {**handle.metadata, "downloadable": False}
    return handle


def capabilities(handle_or_id) -> set:
    handle = load(handle_or_id) if isinstance(handle_or_id, str) else handle_or_id
    return handle.capabilities()


def _entry_caps(entry):
    caps = set(entry.capabilities)
    downloadable = entry.downloadable
    if "docs" not in caps:
        parent = _docs_parent(entry.id)
        if parent is not None:
            caps.add("docs")
            downloadable = downloadable and _REGISTRY[parent].downloadable
    return caps, downloadable


def list_datasets() -> list:
    """``(id, capabilities, downloadable)`` for every entry, sorted by ID."""
    out = []
    for dataset_id in sorted(_REGISTRY):
        caps, downloadable = _entry_caps(_REGISTRY[dataset_id])
        out.append((dataset_id, caps, downloadable))
    return out


def ordered_caps(caps) -> list:
    return [e for e in ENTITY_TYPES if e in caps]


# -- custom datasets --------------------------------------------------------------

def _file_iter(path, parse):
    def open_iter():
        with formats.open_source(path) as f:
            yield from parse(f)
    return open_iter


def create_dataset(docs_tsv=None, queries_tsv=None, qrels_trec=None, *,
                   dataset_id="local/custom", description="") -> DatasetHandle:
    """Handle over local files: TSV docs and queries, TREC qrels."""
    paths = {"docs": docs_tsv, "queries": queries_tsv, "qrels": qrels_trec}
    if all(p is None for p in paths.values()):
        raise ValueError("create_dataset needs at least one file")
    for p in paths.values():
        if p is not None and not Path(p).is_file():
            raise FileMissing(p)
    providers = {}
    if docs_tsv is not None:
        providers["docs"] = EntityProvider(
            GenericDoc, _file_iter(docs_tsv, lambda f: formats.parse_tsv(f, GenericDoc)))
    if queries_tsv is not None:
        providers["queries"] = EntityProvider(
            GenericQuery, _file_iter(queries_tsv, lambda f: formats.parse_tsv(f, GenericQuery)))
    if qrels_trec is not None:
        providers["qrels"] = EntityProvider(TrecQrel, _file_iter(qrels_trec, formats.parse_trec_qrels))
    handle = DatasetHandle(dataset_id, providers,
                           {"description": description or "Local files.", "downloadable": True})
    if docs_tsv is not None:
        handle.docs_owner = dataset_id
    return handle


# -- built-in fixture mirrors ------------------------------------------------------

MIRROR_SHA256 = {
    "cord19/metadata.csv": "dca1ab8b7511639dada88ed5a05d52ef2e9cedb8ace332468caf6e8ba504eec8",
    "cord19/trec-covid/qrels": "cc3eb1214479596f4c4f22d83c36f6deb1a7b319a13d496f45cce35fa4810d4c",
    "cord19/trec-covid/topics.trec": "fbb0595719f7816dea0e0e93e7249337672ce54dbbbaa4c15a7a842bc7e8dbb1",
    "cranfield/docs.jsonl": "a158ae4a558253214869015ba527478f4cc3169df152e4e232633285878b614b",
    "cranfield/qrels": "232deae0ca4b15159b2b39a0165258e42a4db3b17187fb2e72da7858b5021d22",
    "cranfield/queries.tsv": "30d2566db5065c8d7a8d29d9781d72ebfc89511e6137b7ff7ad4c2715d97e2f5",
    "msmarco-passage/collection.tsv": "f42268598303ce48d23d645b0d10ae8e545b85dd46aaa52f08ab6ace2d6e072a",
    "msmarco-passage/dev/qrels": "a67002b373295ecb4a53e810069c4d8f624500b19e3c90f0e0a591a1fb657fe9",
    "msmarco-passage/dev/queries.tsv": "534f019c394a64a1d14effab9e6dba9ee459bf15abc1c6119df6b13db04c7fc4",
    "msmarco-passage/dev/run.trec": "47b9dad20188d4e55fd517d86dbc7d6f8665debe3d4a598dd8598d0a9635755f",
    "msmarco-passage/train/docpairs.tsv": "e1137ec7a97fcf276f4d6cf01f1839dc5247f5aec2f1ba82745c2c0197ecb11a",
    "msmarco-passage/train/qrels": "d69e91e2a26ef5e1579019504294d6d0ea498922b83baee1bf7a6897654ee806",
    "msmarco-passage/train/queries.tsv": "37fd4b2d1b2c623945c122f0e45abbe1fa213151c9b79af1ebc9f99e4ef3ff4e",
    "robust04-sample/docs.sgml.gz": "3286a2bdca64eb2a7a1c43a0c55c14a3e2543b7bd9c7e67001fcf6950082c47b",
    "robust04-sample/qrels": "2d265855219d2187f0497846d1bf17a3344c4b6e89a53825783876346e228bab",
    "robust04-sample/topics.trec": "ee74faed8a22d37bb737100bd797a1a3a2f8d83cdc1c8b7683fb6cbe2e6fa5d5",
    "vaswani/docs.sgml": "11d5feb410ba401c5d8a7826fa2690c2e8ee7e6dcf269a9a9a20bfa2d1393c42",
    "vaswani/qrels": "780360b70d65dba8ced9fbf43a4c7115190dad19f1a3ac7542044a1d9751d44a",
    "vaswani/topics.trec": "04b9d13d07884a2c871e990a4e5883c9e01bf645840cad4111d7fe96ca77ddee",
}

CORD19_NOTICE = ("The CORD-19 fixture mirrors records released under their own per-article "
                 "licences. By continuing you confirm you have read the dataset terms of use.")
ROBUST04_INSTRUCTIONS = ("The TREC disks 4 and 5 collection is licence-restricted and cannot be "
                         "downloaded automatically. Obtain it from NIST, then place the gzip'd "
                         "SGML file at {dest}.")

CranfieldDoc = Schema("CranfieldDoc", "docs", [
    ("doc_id", Kind.ID), ("title", Kind.TEXT), ("text", Kind.TEXT),
    ("author", Kind.TEXT), ("bib", Kind.TEXT)])
Cord19Doc = Schema("Cord19Doc", "docs", [
    ("doc_id", Kind.ID), ("title", Kind.TEXT), ("doi", Kind.TEXT),
    ("date", Kind.TEXT), ("abstract", Kind.TEXT)])
_Cord19Csv = Schema("Cord19Doc", "docs", [
    ("cord_uid", Kind.ID), ("title", Kind.TEXT), ("doi", Kind.TEXT),
    ("date", Kind.TEXT), ("abstract", Kind.TEXT)], derived=True)


def _mirror_spec(rel, **kw) -> DownloadSpec:
    return DownloadSpec(dest=rel, url=mirror_url() + rel, sha256=MIRROR_SHA256[rel], **kw)


def _fetched_iter(spec, parse):
    def open_iter():
        path = ensure_file(spec).path
        with formats.open_source(path) as f:
            yield from parse(f)
    return open_iter


def _provider(schema, rel, parse, count=None, **spec_kw):
    spec = _mirror_spec(rel, **spec_kw)
    return EntityProvider(schema, _fetched_iter(spec, parse), count, (spec,))


def _tsv(schema):
    return lambda f: formats.parse_tsv(f, schema)


def _msmarco_docs(f):
    for rec in formats.parse_tsv(f, GenericDoc):
        fixed = formats.fix_double_encoding(rec.text)
        yield rec if fixed is rec.text else rec._replace(text=fixed)


def _cord19_docs(f):
    for rec in formats.parse_csv(f, _Cord19Csv):
        yield Cord19Doc.record_cls(*rec)


def _handle(dataset_id, providers, description, downloadable=True, **meta):
    return DatasetHandle(dataset_id, providers,
                         {"description": description, "downloadable": downloadable, **meta})


def _vaswani():
    return _handle("vaswani", {
        "docs": _provider(GenericDoc, "vaswani/docs.sgml", formats.parse_trec_docs, 12),
        "queries": _provider(TrecQuery, "vaswani/topics.trec", formats.parse_trec_topics),
        "qrels": _provider(TrecQrel, "vaswani/qrels", formats.parse_trec_qrels),
    }, "Small physics-abstracts test collection (fixture mirror).")


def _cranfield():
    return _handle("cranfield", {
        "docs": _provider(CranfieldDoc, "cranfield/docs.jsonl",
                          lambda f: formats.parse_jsonl(f, CranfieldDoc), 10),
        "queries": _provider(GenericQuery, "cranfield/queries.tsv", _tsv(GenericQuery)),
        "qrels": _provider(TrecQrel, "cranfield/qrels", formats.parse_trec_qrels),
    }, "Aeronautics abstracts with graded judgments (fixture mirror).")


def _msmarco():
    return _handle("msmarco-passage", {
        "docs": _provider(GenericDoc, "msmarco-passage/collection.tsv", _msmarco_docs, 20),
    }, "Web passages from search logs (fixture mirror). Text is repaired when it was "
       "double-encoded upstream.")


def _msmarco_train():
    return _handle("msmarco-passage/train", {
        "queries": _provider(GenericQuery, "msmarco-passage/train/queries.tsv", _tsv(GenericQuery)),
        "qrels": _provider(TrecQrel, "msmarco-passage/train/qrels", formats.parse_trec_qrels),
        "docpairs": _provider(GenericDocPair, "msmarco-passage/train/docpairs.tsv",
                              _tsv(GenericDocPair)),
    }, "Training queries, judgments and suggested training pairs.")


def _msmarco_dev():
    return _handle("msmarco-passage/dev", {
        "queries": _provider(GenericQuery, "msmarco-passage/dev/queries.tsv", _tsv(GenericQuery)),
        "qrels": _provider(TrecQrel, "msmarco-passage/dev/qrels", formats.parse_trec_qrels),
        "scoreddocs": _provider(TrecScoredDoc, "msmarco-passage/dev/run.trec",
                                formats.parse_trec_run),
    }, "Development queries with a BM25 reranking pool.")


def _cord19():
    return _handle("cord19", {
        "docs": _provider(Cord19Doc, "cord19/metadata.csv", _cord19_docs, 15,
                          license_notice=CORD19_NOTICE),
    }, "COVID-19 literature metadata (fixture mirror).", license_note=CORD19_NOTICE)


def _trec_covid():
    return _handle("cord19/trec-covid", {
        "queries": _provider(TrecQuery, "cord19/trec-covid/topics.trec", formats.parse_trec_topics),
        "qrels": _provider(TrecQrel, "cord19/trec-covid/qrels", formats.parse_trec_qrels),
    }, "Ad-hoc COVID-19 benchmark over the cord19 documents.")


_ROBUST_DOCS = "robust04-sample/docs.sgml.gz"


def _robust04():
    spec = DownloadSpec(dest=_ROBUST_DOCS, sha256=MIRROR_SHA256[_ROBUST_DOCS],
                        manual_instructions=ROBUST04_INSTRUCTIONS.format(
                            dest=home_dir("robust04-sample") / "docs.sgml.gz"))
    docs = EntityProvider(GenericDoc, _fetched_iter(spec, formats.parse_trec_docs), 40, (spec,))

    def store(**kwargs):
        from .gzseek import GzipDocstore

        path = ensure_file(spec).path
        return GzipDocstore(path, home_dir("robust04-sample") / "gzdocs", **kwargs)

    handle = _handle("robust04-sample", {
        "docs": docs,
        "queries": _provider(TrecQuery, "robust04-sample/topics.trec", formats.parse_trec_topics),
        "qrels": _provider(TrecQrel, "robust04-sample/qrels", formats.parse_trec_qrels),
    }, "Newswire sample requiring manual placement; lookups seek inside the gzip file.",
        downloadable=False)
    handle.docstore_factory = store
    return handle


for _id, _factory in [
    ("vaswani", _vaswani), ("cranfield", _cranfield),
    ("msmarco-passage", _msmarco), ("msmarco-passage/train", _msmarco_train),
    ("msmarco-passage/dev", _msmarco_dev),
    ("cord19", _cord19), ("cord19/trec-covid", _trec_covid),
    ("robust04-sample", _robust04),
]:
    register(_id, _factory)
del _id, _factory
