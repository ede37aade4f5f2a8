"""``ir_datasets`` command-line tool.

Exit codes: 0 ok, 1 other error, 2 unknown dataset, 3 entity not provided or
source unavailable (manual placement / licence), 4 every lookup missed,
5 bad --fields / --slice / --format, 6 feature unsupported on this platform,
7 hash mismatch, 8 network failure.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
import threading

from . import __version__
from .errors import (HashMismatch, InvalidSlice, IRDatasetsError, LicenseNotAccepted,
                     ManualFileRequired, NetworkError, UnknownDataset, UnknownField,
                     UnsupportedEntity, UnsupportedFormat)

EXIT_OK, EXIT_ERROR, EXIT_UNKNOWN, EXIT_UNSUPPORTED = 0, 1, 2, 3
EXIT_ALL_MISSING, EXIT_BAD_ARGS, EXIT_PLATFORM, EXIT_HASH, EXIT_NETWORK = 4, 5, 6, 7, 8

ENTITY_ALIASES = {
    "docs": "docs", "documents": "docs",
    "queries": "queries", "topics": "queries",
    "qrels": "qrels", "judgments": "qrels",
    "scoreddocs": "scoreddocs", "docpairs": "docpairs",
}

ANSERINI_HINT = "# To index with Anserini, run:"


class _Exit(Exception):
    def __init__(self, code, message=None):
        self.code = code
        self.message = message


def _error_code(exc) -> int:
    if isinstance(exc, UnknownDataset):
        return EXIT_UNKNOWN
    if isinstance(exc, (UnsupportedEntity, ManualFileRequired, LicenseNotAccepted)):
        return EXIT_UNSUPPORTED
    if isinstance(exc, (UnknownField, InvalidSlice, UnsupportedFormat)):
        return EXIT_BAD_ARGS
    if isinstance(exc, HashMismatch):
        return EXIT_HASH
    if isinstance(exc, NetworkError):
        return EXIT_NETWORK
    return EXIT_ERROR


def _entity(name) -> str:
    try:
        return ENTITY_ALIASES[name.lower()]
    except KeyError:
        raise _Exit(EXIT_UNSUPPORTED, f"unknown entity type {name!r}") from None


def _fields(arg):
    if not arg:
        return None
    names = [n.strip() for n in arg.split(",") if n.strip()]
    if not names:
        raise _Exit(EXIT_BAD_ARGS, "--fields is empty")
    return names


def _projector(schema, names):
    if names is None:
        return lambda rec: rec
    target = schema.derive(names)  # raises UnknownField
    positions = [schema.position(n) for n in names]
    make = target.record_cls._make
    return lambda rec: make(rec[i] for i in positions)


# -- commands -------------------------------------------------------------------

def cmd_export(args, out, err):
    from . import formats
    from .registry import load
    from .slicing import SliceExpr

    entity = _entity(args.entity)
    handle = load(args.dataset_id)
    schema = handle.schema(entity)
    fields = _fields(args.fields)
    # a projection rarely has the columns trec needs, so it defaults to tsv
    trec_default = entity in ("qrels", "scoreddocs") and fields is None
    fmt = args.format or ("trec" if trec_default else "tsv")
    if fmt not in formats.FORMATS:
        raise UnsupportedFormat(entity, fmt)
    if fmt == "trec" and entity not in ("qrels", "scoreddocs"):
        raise UnsupportedFormat(entity, fmt)
    project = _projector(schema, fields)
    if args.slice is not None:
        if entity != "docs":
            raise _Exit(EXIT_BAD_ARGS, "--slice applies to docs only")
        expr = SliceExpr.parse(args.slice)
        records = iter(handle.docs_iter().slice(expr))
    elif entity == "docs":
        records = iter(handle.docs_iter())
    else:
        records = handle.iter(entity)
    serialize = formats.serialize
    write = out.write
    for rec in records:
        write(serialize(project(rec), fmt))
        write("\n")
    return EXIT_OK


def cmd_lookup(args, out, err):
    from . import formats
    from .registry import load

    handle = load(args.dataset_id)
    schema = handle.schema("docs")
    fmt = args.format or "tsv"
    if fmt not in ("tsv", "jsonl"):
        raise UnsupportedFormat("docs", fmt)
    project = _projector(schema, _fields(args.fields))
    store = handle.docs_store()
    found = set()
    for rec in store.get_many_iter(args.ids):
        found.add(rec[0])
        out.write(formats.serialize(project(rec), fmt) + "\n")
    out.flush()
    missing = [i for i in dict.fromkeys(args.ids) if i not in found]
    for doc_id in missing:
        err.write(f"NOT FOUND: {doc_id}\n")
    if args.ids and len(missing) == len(set(args.ids)):
        return EXIT_ALL_MISSING
    return EXIT_OK


def cmd_list(args, out, err):
    from .registry import list_datasets, ordered_caps

    for dataset_id, caps, downloadable in list_datasets():
        if args.downloadable and not downloadable:
            continue
        mode = "auto" if downloadable else "manual"
        out.write(f"{dataset_id}\t{','.join(ordered_caps(caps))}\t{mode}\n")
    return EXIT_OK


def cmd_verify(args, out, err):
    from .fetch import check_links
    from .registry import load

    handle = load(args.dataset_id)
    specs = handle.download_specs()
    report = check_links(specs, deep=args.deep, timeout=args.timeout)
    for e in report.entries:
        state = "ok" if e.ok else "FAIL"
        detail = f"\t{e.error}" if e.error else ""
        out.write(f"{state}\t{e.dest}\t{e.url}{detail}\n")
    for s in specs:
        if s.url is None:
            out.write(f"manual\t{s.dest}\n")
    if report.ok:
        return EXIT_OK
    if any(e.hash_ok is False for e in report.failures):
        return EXIT_HASH
    return EXIT_NETWORK


def render_catalog() -> dict:
    """Relative path -> markdown text for the static dataset catalog."""
    from .registry import list_datasets, load, ordered_caps

    files = {}
    rows = ["# Datasets", "",
            "| ID | Entity types | Acquisition |",
            "| --- | --- | --- |"]
    for dataset_id, caps, downloadable in list_datasets():
        mode = "auto" if downloadable else "manual"
        rel = f"{dataset_id}.md"
        rows.append(f"| [{dataset_id}]({rel}) | {', '.join(ordered_caps(caps))} | {mode} |")
        handle = load(dataset_id)
        page = [f"# {dataset_id}", "", handle.metadata.get("description", ""), "",
                f"Acquisition: {'automatic download' if downloadable else 'manual placement'}", ""]
        note = handle.metadata.get("license_note")
        if note:
            page += ["## Licence", "", note, ""]
        page += ["## Entity types", ""]
        for entity in ordered_caps(caps):
            schema = handle.schema(entity)
            inherited = entity == "docs" and handle.docs_owner not in (None, dataset_id)
            title = f"### {entity}: `{schema.name}`"
            if inherited:
                title += f" (from `{handle.docs_owner}`)"
            page += [title, "", "| Field | Kind |", "| --- | --- |"]
            page += [f"| {f.name} | {f.kind.value} |" for f in schema.fields]
            page.append("")
        page += ["## Citation", "",
                 "Cite the original collection and benchmark papers when reporting "
                 "results on this dataset.", ""]
        files[rel] = "\n".join(page)
    rows.append("")
    files["index.md"] = "\n".join(rows)
    return files


def cmd_catalog(args, out, err):
    from pathlib import Path

    from .errors import StorageError

    root = Path(args.out)
    try:
        for rel, text in sorted(render_catalog().items()):
            path = root / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise StorageError(f"cannot write catalog to {root}: {exc}") from exc
    out.write(f"{root / 'index.md'}\n")
    return EXIT_OK


def cmd_doc_fifos(args, out, err):
    import json
    import tempfile

    from . import formats
    from .registry import load
    from .slicing import partition

    if os.name != "posix" or not hasattr(os, "mkfifo"):
        raise _Exit(EXIT_PLATFORM, "doc_fifos needs POSIX named pipes")
    if args.count < 1:
        raise _Exit(EXIT_BAD_ARGS, "--count must be positive")
    handle = load(args.dataset_id)
    handle.provider("docs")
    directory = args.dir or tempfile.mkdtemp(prefix="irds-fifos-")
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i in range(args.count):
        path = os.path.join(directory, f"docs-{i}.jsonl")
        os.mkfifo(path)
        paths.append(path)
    # force the shared store into existence before readers attach
    total = len(handle.docs_iter())
    out.write(f"{directory}\n")
    out.write(f"{ANSERINI_HINT}\n")
    out.write(f"# bin/IndexCollection -collection JsonCollection -input {directory} "
              f"-index <index_dir> -generator DefaultLuceneDocumentGenerator "
              f"-threads {args.count} -storePositions -storeDocvectors -storeRaw\n")
    out.flush()
    errors = []

    def feed(i):
        try:
            view = partition(load(args.dataset_id).docs_iter(), args.count, i)
            with open(paths[i], "w", encoding="utf-8", newline="\n") as f:
                for rec in view:
                    f.write(formats.serialize(rec, "jsonl"))
                    f.write("\n")
        except BrokenPipeError:
            pass
        except Exception as exc:  # reported after join
            errors.append(exc)

    threads = [threading.Thread(target=feed, args=(i,), daemon=True) for i in range(args.count)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if not args.keep:
        for p in paths:
            os.unlink(p)
    if errors:
        raise errors[0]
    if not args.quiet:
        err.write(json.dumps({"documents": total, "pipes": args.count}) + "\n")
    return EXIT_OK


# -- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ir_datasets",
                                description="Download, export and look up IR datasets.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--home", help="data directory (overrides IRDS_HOME)")
    p.add_argument("--accept-licenses", action="store_true",
                   help="accept dataset licence notices non-interactively")
    p.add_argument("--quiet", action="store_true", help="only report errors on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("export", help="stream one entity type to stdout")
    e.add_argument("dataset_id")
    e.add_argument("entity")
    e.add_argument("--format", choices=("tsv", "jsonl", "trec"))
    e.add_argument("--fields", help="comma-separated field names to keep")
    e.add_argument("--slice", help="docs only: start:stop[:step], e.g. 100:110, -10:, :1/3")
    e.set_defaults(func=cmd_export)

    lk = sub.add_parser("lookup", help="print documents by ID")
    lk.add_argument("dataset_id")
    lk.add_argument("ids", nargs="+")
    lk.add_argument("--format", choices=("tsv", "jsonl"))
    lk.add_argument("--fields")
    lk.set_defaults(func=cmd_lookup)

    ls = sub.add_parser("list", help="list registered datasets")
    ls.add_argument("--downloadable", action="store_true", help="only automatic downloads")
    ls.set_defaults(func=cmd_list)

    v = sub.add_parser("verify", help="check that a dataset's source files are reachable")
    v.add_argument("dataset_id")
    v.add_argument("--deep", action="store_true", help="download and compare hashes")
    v.add_argument("--timeout", type=float, default=30.0)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("catalog", help="write markdown documentation pages")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_catalog)

    f = sub.add_parser("doc_fifos", help="feed documents to N named pipes in parallel")
    f.add_argument("dataset_id")
    f.add_argument("--count", type=int, default=max(1, (os.cpu_count() or 2) // 2))
    f.add_argument("--dir", help="directory for the pipes (default: new temp dir)")
    f.add_argument("--keep", action="store_true", help="leave the pipes in place afterwards")
    f.set_defaults(func=cmd_doc_fifos)
    return p


def _glue_negative_slice(argv):
    # "--slice -10:" would otherwise read -10: as an option
    out = []
    i = 0
    while i < len(argv):
        if argv[i] == "--slice" and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"--slice={argv[i + 1]}")
            i += 2
            continue
        out.append(argv[i])
        i += 1
    return out


def _utf8(stream):
    reconfigure = getattr(stream, "reconfigure", None)
    if reconfigure is not None:
        try:
            reconfigure(encoding="utf-8", newline="\n")
        except (ValueError, OSError):
            pass
    return stream


def main(argv=None, stdout=None, stderr=None) -> int:
    out = stdout or _utf8(sys.stdout)
    err = stderr or sys.stderr
    parser = build_parser()
    argv = _glue_negative_slice(list(sys.argv[1:] if argv is None else argv))
    try:
        with contextlib.redirect_stderr(err), contextlib.redirect_stdout(out):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_BAD_ARGS
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=err)
    if args.home:
        os.environ["IRDS_HOME"] = args.home
    if args.accept_licenses:
        os.environ["IRDS_ACCEPT_LICENSES"] = "1"
    try:
        code = args.func(args, out, err)
        out.flush()
        return code
    except BrokenPipeError:
        # downstream closed early (e.g. `| head`): not an error
        try:
            devnull = os.open(os.devnull, os.O_WRONLY)
            os.dup2(devnull, sys.stdout.fileno())
        except (OSError, ValueError):
            pass
        return EXIT_OK
    except _Exit as exc:
        if exc.message:
            err.write(f"ir_datasets: {exc.message}\n")
        return exc.code
    except (IRDatasetsError, OSError) as exc:
        err.write(f"ir_datasets: {exc}\n")
        return _error_code(exc)


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
