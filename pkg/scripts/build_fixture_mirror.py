"""Regenerate the small fixture mirror shipped in src/irdatakit/mirror.

Prints the sha256 of every file so the registry table can be updated.
Output is deterministic.
"""

import gzip
import hashlib
import io
import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1] / "src" / "irdatakit" / "mirror"

WORDS = ("signal energy wave field particle measure current detector plasma "
         "electron magnetic flow boundary layer pressure wing surface heat "
         "transfer model theory result method system value data rate sample "
         "network retrieval index query document relevance ranking").split()


def para(rng, n):
    words = [rng.choice(WORDS) for _ in range(n)]
    return (" ".join(words)).capitalize() + "."


def write(rel, data):
    path = ROOT / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    path.write_bytes(data)


def msmarco(rng):
    docs = {i: para(rng, 25) for i in range(20)}
    docs[0] = ("The presence of communication amid scientific teams shaped how quickly "
               "the wartime laboratories could share results.")
    docs[1] = ("The Manhattan Project and its atomic bomb helped end the war and "
               "reshaped research funding for decades.")
    docs[16] = ("The approach is based on a theory of justice that treats fairness "
                "as the first virtue of institutions.")
    # stored as UTF-8 that was once mis-decoded as Latin-1
    docs[7] = "The cafÃ© near the reactor site served as an informal meeting place."
    write("msmarco-passage/collection.tsv",
          "".join(f"{i}\t{t}\n" for i, t in docs.items()))
    write("msmarco-passage/train/queries.tsv",
          "121352\tdefine extreme\n"
          "634306\twhat does chattel mean on credit history\n"
          "920825\twhat was the manhattan project\n"
          "510633\ttheory of justice fairness\n")
    write("msmarco-passage/train/qrels",
          "1185869 0 0 1\n1185868 0 16 1\n920825 0 1 1\n510633 0 16 1\n")
    write("msmarco-passage/train/docpairs.tsv",
          "121352\t0\t3\n634306\t16\t4\n920825\t1\t9\n510633\t16\t2\n")
    write("msmarco-passage/dev/queries.tsv",
          "1048585\twhat is paula deen's brother\n2\tandrogen receptor define\n")
    write("msmarco-passage/dev/qrels", "1048585 0 5 1\n2 0 12 1\n")
    run = []
    for qid in ("1048585", "2"):
        for rank, did in enumerate(rng.sample(range(20), 5), start=1):
            run.append(f"{qid} Q0 {did} {rank} {round(20.0 - rank * 1.5, 3)} bm25\n")
    write("msmarco-passage/dev/run.trec", "".join(run))


def vaswani(rng):
    out = []
    for i in range(1, 13):
        out.append(f"<DOC>\n<DOCNO>{i}</DOCNO>\n<TEXT>\n{para(rng, 30)}\n</TEXT>\n</DOC>\n")
    write("vaswani/docs.sgml", "".join(out))
    topics = []
    for q in range(1, 4):
        topics.append(f"<top>\n<num> Number: {q}\n<title> {para(rng, 4)}\n"
                      f"<desc> Description:\n{para(rng, 12)}\n"
                      f"<narr> Narrative:\n{para(rng, 15)}\n</top>\n\n")
    write("vaswani/topics.trec", "".join(topics))
    write("vaswani/qrels", "".join(
        f"{q} 0 {d} 1\n" for q in range(1, 4) for d in sorted(rng.sample(range(1, 13), 3))))


def cranfield(rng):
    lines = []
    for i in range(1, 11):
        lines.append(json.dumps({
            "doc_id": str(i), "title": para(rng, 6), "text": para(rng, 40),
            "author": rng.choice(["brenckman,m.", "ting-yili", "m. a. biot", "e. reissner"]),
            "bib": f"j. ae. scs. {rng.randint(20, 30)}, 1958, {rng.randint(1, 400)}.",
        }, ensure_ascii=False) + "\n")
    write("cranfield/docs.jsonl", "".join(lines))
    write("cranfield/queries.tsv", "".join(f"{q}\t{para(rng, 10)}\n" for q in range(1, 5)))
    write("cranfield/qrels", "".join(
        f"{q} 0 {d} {rng.randint(1, 4)}\n" for q in range(1, 5)
        for d in sorted(rng.sample(range(1, 11), 3))))


def cord19(rng):
    import csv

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cord_uid", "title", "doi", "date", "abstract"])
    for i in range(15):
        uid = "".join(rng.choice("abcdefghijklmnopqrstuvwxyz0123456789") for _ in range(8))
        w.writerow([uid, para(rng, 7), f"10.1000/cov.{i:04d}", f"2020-0{rng.randint(1, 9)}-1{i % 10}",
                    para(rng, 35) + (' "quoted, with comma"' if i % 5 == 0 else "")])
    write("cord19/metadata.csv", buf.getvalue())
    uids = [row.split(",")[0] for row in buf.getvalue().splitlines()[1:]]
    topics = []
    for q in range(1, 4):
        topics.append(f"<top>\n<num> Number: {q}\n<title> coronavirus {para(rng, 3)}\n"
                      f"<desc> Description:\n{para(rng, 10)}\n"
                      f"<narr> Narrative:\n{para(rng, 14)}\n</top>\n\n")
    write("cord19/trec-covid/topics.trec", "".join(topics))
    write("cord19/trec-covid/qrels", "".join(
        f"{q} {r} {u} {rng.randint(0, 2)}\n" for q in range(1, 4)
        for r, u in enumerate(sorted(rng.sample(uids, 4)))))


def robust04(rng):
    out = []
    for i in range(40):
        out.append(f"<DOC>\n<DOCNO> FBIS3-{1000 + i} </DOCNO>\n<HEADER>\n<H3> {para(rng, 5)} </H3>\n"
                   f"</HEADER>\n<TEXT>\n{para(rng, 60)}\n</TEXT>\n</DOC>\n")
    raw = "".join(out).encode("utf-8")
    # two gzip members, as produced by concatenating archives
    half = raw.index(b"<DOC>", len(raw) // 2)
    blob = b"".join(gzip.compress(part, 9, mtime=0) for part in (raw[:half], raw[half:]))
    write("robust04-sample/docs.sgml.gz", blob)
    write("robust04-sample/topics.trec", "".join(
        f"<top>\n<num> Number: {301 + q}\n<title> {para(rng, 3)}\n<desc> Description:\n"
        f"{para(rng, 9)}\n<narr> Narrative:\n{para(rng, 12)}\n</top>\n\n" for q in range(3)))
    write("robust04-sample/qrels", "".join(
        f"{301 + q} 0 FBIS3-{1000 + d} {rng.randint(0, 1)}\n" for q in range(3)
        for d in sorted(rng.sample(range(40), 4))))


def main():
    rng = random.Random(20210711)
    for make in (msmarco, vaswani, cranfield, cord19, robust04):
        make(rng)
    for path in sorted(ROOT.rglob("*")):
        if path.is_file():
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
            print(f'    "{path.relative_to(ROOT).as_posix()}": "{digest}",')


if __name__ == "__main__":
    main()
