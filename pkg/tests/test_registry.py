import hashlib
import shutil

import pytest

import irdatakit
from irdatakit import registry
from irdatakit.errors import (FileMissing, ManualFileRequired, UnknownDataset,
                              UnsupportedEntity)
from irdatakit.registry import MIRROR_DIR, MIRROR_SHA256


@pytest.fixture
def scratch_ids():
    made = []
    yield made
    for dataset_id in made:
        registry.unregister(dataset_id)


def test_load_is_lazy(home):
    ds = irdatakit.load("msmarco-passage")
    assert ds.id == "msmarco-passage"
    assert list(home.iterdir()) == []


@pytest.mark.parametrize("bad", ["", "msmarco-pasage", "MSMARCO-passage", "a//b", "/x", None])
def test_unknown_ids(bad):
    with pytest.raises(UnknownDataset):
        irdatakit.load(bad)


def test_one_edit_typo_suggests_the_real_id():
    with pytest.raises(UnknownDataset) as e:
        irdatakit.load("msmarco-pasage")
    assert "msmarco-passage" in e.value.suggestions
    assert "msmarco-passage" in str(e.value)
    with pytest.raises(UnknownDataset) as e:
        irdatakit.load("zzzzzzzzzzzzzzzzz")
    assert e.value.suggestions == []


def test_levenshtein_examples():
    assert registry.levenshtein("", "") == 0
    assert registry.levenshtein("kitten", "sitting") == 3
    assert registry.levenshtein("abc", "") == 3
    assert registry.levenshtein("flaw", "lawn") == 2


def test_capabilities():
    assert irdatakit.capabilities("msmarco-passage/train") == {"docs", "queries", "qrels",
                                                               "docpairs"}
    assert irdatakit.capabilities("msmarco-passage") == {"docs"}
    assert irdatakit.capabilities("msmarco-passage/dev") == {"docs", "queries", "qrels",
                                                             "scoreddocs"}
    assert irdatakit.capabilities("vaswani") == {"docs", "queries", "qrels"}


def test_unsupported_entity():
    ds = irdatakit.load("msmarco-passage")
    with pytest.raises(UnsupportedEntity):
        ds.queries_iter()
    assert not ds.has("qrels")


def test_children_share_parent_docs_byte_for_byte(home):
    parent = [tuple(d) for d in irdatakit.load("msmarco-passage").docs_iter()]
    for child in ("msmarco-passage/train", "msmarco-passage/dev"):
        assert [tuple(d) for d in irdatakit.load(child).docs_iter()] == parent
    assert len(parent) == 20
    cord = [tuple(d) for d in irdatakit.load("cord19").docs_iter()]
    assert [tuple(d) for d in irdatakit.load("cord19/trec-covid").docs_iter()] == cord
    # shared files are fetched once, under the owner's directory
    assert (home / "msmarco-passage" / "collection.tsv").exists()
    assert not (home / "msmarco-passage" / "train" / "collection.tsv").exists()


def test_child_store_is_the_parent_store(home):
    child = irdatakit.load("msmarco-passage/train")
    assert child.docs_owner == "msmarco-passage"
    assert child.docs_store().get("16").doc_id == "16"
    assert (home / "msmarco-passage" / "docstore").is_dir()


def test_double_encoding_repaired_in_registry(home):
    doc = irdatakit.load("msmarco-passage").docs_store().get("7")
    assert "café" in doc.text and "Ã©" not in doc.text


def test_list_sorted_and_complete():
    rows = irdatakit.list_datasets()
    ids = [r[0] for r in rows]
    assert ids == sorted(ids)
    assert {"vaswani", "cranfield", "msmarco-passage", "msmarco-passage/train",
            "cord19", "cord19/trec-covid", "robust04-sample"} <= set(ids)
    by_id = {r[0]: r for r in rows}
    assert by_id["robust04-sample"][2] is False
    assert by_id["vaswani"][2] is True
    assert by_id["msmarco-passage/train"][1] == {"docs", "queries", "qrels", "docpairs"}


def test_ordered_caps():
    assert registry.ordered_caps({"qrels", "docs", "docpairs"}) == ["docs", "qrels", "docpairs"]


def test_register_and_load_custom(tmp_path, scratch_ids):
    docs = tmp_path / "d.tsv"
    docs.write_text("a\talpha\nb\tbeta\n")
    registry.register("local/x", lambda: irdatakit.create_dataset(docs, dataset_id="local/x"))
    scratch_ids.append("local/x")
    assert [d.doc_id for d in irdatakit.load("local/x").docs_iter()] == ["a", "b"]
    with pytest.raises(ValueError):
        registry.register("local/x", lambda: irdatakit.create_dataset(docs))
    with pytest.raises(ValueError):
        registry.register("Bad ID", lambda: irdatakit.create_dataset(docs))


def test_child_cannot_shadow_parent_docs(tmp_path, scratch_ids):
    docs = tmp_path / "d.tsv"
    docs.write_text("a\talpha\n")
    with pytest.raises(ValueError):
        registry.register("vaswani/shadow",
                          lambda: irdatakit.create_dataset(docs, dataset_id="vaswani/shadow"))
    assert "vaswani/shadow" not in [r[0] for r in irdatakit.list_datasets()]


def test_create_dataset(tmp_path, home):
    docs = tmp_path / "d.tsv"
    queries = tmp_path / "q.tsv"
    qrels = tmp_path / "qrels"
    docs.write_text("d1\tfirst doc\nd2\tsecond doc\n")
    queries.write_text("q1\tdoc\n")
    qrels.write_text("q1 0 d2 1\n")
    ds = irdatakit.create_dataset(docs, queries, qrels)
    assert ds.capabilities() == {"docs", "queries", "qrels"}
    assert ds.id == "local/custom"
    assert list(ds.qrels_iter())[0] == ds.qrels_cls()("q1", "0", "d2", 1)
    assert ds.docs_store().get("d2").text == "second doc"
    with pytest.raises(ValueError):
        irdatakit.create_dataset()
    with pytest.raises(FileMissing):
        irdatakit.create_dataset(tmp_path / "absent.tsv")
    empty = tmp_path / "e.tsv"
    empty.write_text("")
    assert len(irdatakit.create_dataset(empty, dataset_id="local/empty").docs_iter()) == 0


def test_handles_are_independent(home):
    a = irdatakit.load("vaswani")
    b = irdatakit.load("vaswani")
    assert a is not b
    ia = iter(a.queries_iter())
    first = next(ia)
    assert next(iter(b.queries_iter())) == first
    assert list(a.queries_iter())[0] == first


def test_license_gate_blocks_until_accepted(home, monkeypatch):
    from irdatakit.errors import LicenseNotAccepted

    monkeypatch.delenv("IRDS_ACCEPT_LICENSES")
    monkeypatch.setattr("sys.stdin.isatty", lambda: False, raising=False)
    with pytest.raises(LicenseNotAccepted):
        list(irdatakit.load("cord19").docs_iter())
    assert not (home / "cord19" / "metadata.csv").exists()


def test_manual_dataset(home):
    ds = irdatakit.load("robust04-sample")
    assert not ds.downloadable
    with pytest.raises(ManualFileRequired) as e:
        list(ds.docs_iter())
    assert str(home / "robust04-sample" / "docs.sgml.gz") in str(e.value)
    assert len(list(ds.queries_iter())) > 0  # topics are not gated
    (home / "robust04-sample").mkdir(exist_ok=True)
    shutil.copy(MIRROR_DIR / "robust04-sample" / "docs.sgml.gz", home / "robust04-sample")
    docs = list(irdatakit.load("robust04-sample").docs_iter())
    assert len(docs) == 40
    store = irdatakit.load("robust04-sample").docs_store()
    assert store.get(docs[-1].doc_id) == docs[-1]


def test_mirror_files_match_frozen_hashes():
    for rel, digest in MIRROR_SHA256.items():
        assert hashlib.sha256((MIRROR_DIR / rel).read_bytes()).hexdigest() == digest, rel


def test_mirror_url_over_http(home, server, monkeypatch):
    for rel in MIRROR_SHA256:
        server.files["/m/" + rel] = (MIRROR_DIR / rel).read_bytes()
    monkeypatch.setenv("IRDS_MIRROR_URL", server.url("/m"))
    queries = list(irdatakit.load("vaswani").queries_iter())
    assert queries
    assert any(r[1] == "/m/vaswani/topics.trec" for r in server.requests)
