import hashlib
import os
import shutil
import subprocess
import threading
import time

import pytest

from irdatakit.errors import (FileMissing, HashMismatch, LicenseNotAccepted, ManualFileRequired,
                              NetworkError)
from irdatakit.fetch import (EMPTY_SHA256, USER_AGENT, DownloadSpec, FileLock, check_links,
                             download_resumable, ensure_file, verify)

PAYLOAD = os.urandom(1 << 18)
DIGEST = hashlib.sha256(PAYLOAD).hexdigest()


def test_verify_examples(tmp_path):
    empty = tmp_path / "empty"
    empty.write_bytes(b"")
    assert verify(empty, EMPTY_SHA256)
    assert not verify(empty, "0" * 64)
    with pytest.raises(FileMissing):
        verify(tmp_path / "nope", EMPTY_SHA256)


@pytest.mark.skipif(shutil.which("sha256sum") is None, reason="no sha256sum utility")
def test_verify_against_system_tool(tmp_path):
    p = tmp_path / "rand"
    p.write_bytes(os.urandom(1 << 20))
    digest = subprocess.run(["sha256sum", str(p)], capture_output=True, text=True,
                            check=True).stdout.split()[0]
    assert verify(p, digest)


def test_spec_validation():
    with pytest.raises(ValueError):
        DownloadSpec(dest="a")
    with pytest.raises(ValueError):
        DownloadSpec(dest="a", url="http://x", manual_instructions="y")
    with pytest.raises(ValueError):
        DownloadSpec(dest="a", url="http://x")
    with pytest.raises(ValueError):
        DownloadSpec(dest="/abs", url="http://x", sha256=DIGEST)
    with pytest.raises(ValueError):
        DownloadSpec(dest="../up", url="http://x", sha256=DIGEST)
    with pytest.raises(ValueError):
        DownloadSpec(dest="a", url="http://x", sha256="xyz")


def test_resume_after_disconnect(server, tmp_path):
    server.files["/f"] = PAYLOAD
    server.drop_after = len(PAYLOAD) // 2
    server.drops_left = 1
    res = download_resumable(server.url("/f"), tmp_path / "f", DIGEST, backoff=0)
    assert res.resumed and res.verified
    assert (tmp_path / "f").read_bytes() == PAYLOAD
    assert res.bytes_fetched == len(PAYLOAD) == server.bytes_sent
    ranged = [r for r in server.requests if r[0] == "GET" and r[2]]
    assert ranged and ranged[0][2] == f"bytes={len(PAYLOAD) // 2}-"
    assert not (tmp_path / "f.part").exists()


def test_restart_without_range_support(server, tmp_path):
    server.files["/f"] = PAYLOAD
    server.ranges = False
    server.drop_after = 10_000
    server.drops_left = 1
    res = download_resumable(server.url("/f"), tmp_path / "f", DIGEST, backoff=0)
    assert not res.resumed
    assert (tmp_path / "f").read_bytes() == PAYLOAD
    assert res.bytes_fetched == 10_000 + len(PAYLOAD)


def test_corrupt_body_quarantined(server, tmp_path):
    server.files["/f"] = PAYLOAD
    server.corrupt = True
    with pytest.raises(HashMismatch) as e:
        download_resumable(server.url("/f"), tmp_path / "f", DIGEST, backoff=0)
    assert e.value.expected == DIGEST
    assert not (tmp_path / "f").exists()
    q = tmp_path / "f.part.quarantine"
    assert q.exists() and q.stat().st_size == len(PAYLOAD)


def test_404_exhausts_retries(server, tmp_path):
    with pytest.raises(NetworkError):
        download_resumable(server.url("/missing"), tmp_path / "f", DIGEST, retries=2, backoff=0)
    assert sum(1 for r in server.requests if r[0] == "GET") == 3


def test_empty_file(server, tmp_path):
    server.files["/e"] = b""
    res = download_resumable(server.url("/e"), tmp_path / "e", EMPTY_SHA256, backoff=0)
    assert res.verified and (tmp_path / "e").read_bytes() == b""


def test_user_agent_sent(tmp_path):
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

    seen = []

    class H(BaseHTTPRequestHandler):
        def log_message(self, *a):
            pass

        def do_GET(self):
            seen.append(self.headers.get("User-Agent"))
            self.send_response(200)
            self.send_header("Content-Length", "0")
            self.end_headers()

    httpd = ThreadingHTTPServer(("127.0.0.1", 0), H)
    threading.Thread(target=httpd.serve_forever, daemon=True).start()
    try:
        download_resumable(f"http://127.0.0.1:{httpd.server_address[1]}/", tmp_path / "u",
                           EMPTY_SHA256, backoff=0)
    finally:
        httpd.shutdown()
    assert seen == [USER_AGENT] and USER_AGENT.startswith("irdatakit/")


@pytest.mark.parametrize("split", [1, 1000, 131072, len(PAYLOAD) - 1])
def test_resume_at_any_split_is_identical(server, tmp_path, split):
    server.files["/f"] = PAYLOAD
    part = tmp_path / "f.part"
    part.write_bytes(PAYLOAD[:split])
    res = download_resumable(server.url("/f"), tmp_path / "f", DIGEST, backoff=0)
    assert res.resumed and res.bytes_fetched == len(PAYLOAD) - split
    assert hashlib.sha256((tmp_path / "f").read_bytes()).hexdigest() == DIGEST


def test_complete_part_gets_416(server, tmp_path):
    server.files["/f"] = PAYLOAD
    (tmp_path / "f.part").write_bytes(PAYLOAD)
    res = download_resumable(server.url("/f"), tmp_path / "f", DIGEST, backoff=0)
    assert res.bytes_fetched == 0 and (tmp_path / "f").read_bytes() == PAYLOAD


def test_ensure_file_idempotent(server, tmp_path):
    server.files["/f"] = PAYLOAD
    spec = DownloadSpec(dest="ds/f", url=server.url("/f"), sha256=DIGEST)
    first = ensure_file(spec, home=tmp_path, backoff=0)
    assert first.bytes_fetched == len(PAYLOAD)
    sent = server.bytes_sent
    n_requests = len(server.requests)
    second = ensure_file(spec, home=tmp_path, backoff=0)
    assert second.bytes_fetched == 0
    assert server.bytes_sent == sent and len(server.requests) == n_requests


def test_ensure_file_refetches_tampered_file(server, tmp_path):
    server.files["/f"] = PAYLOAD
    spec = DownloadSpec(dest="f", url=server.url("/f"), sha256=DIGEST)
    (tmp_path / "f").write_bytes(b"tampered")
    res = ensure_file(spec, home=tmp_path, backoff=0)
    assert res.bytes_fetched == len(PAYLOAD)
    assert (tmp_path / "f.quarantine").read_bytes() == b"tampered"


def test_license_notice_before_transfer(server, tmp_path, capsys):
    server.files["/f"] = PAYLOAD
    spec = DownloadSpec(dest="f", url=server.url("/f"), sha256=DIGEST,
                        license_notice="Terms: research use only.")
    with pytest.raises(LicenseNotAccepted):
        ensure_file(spec, home=tmp_path, accept_licenses=False, interactive=False)
    assert server.requests == []
    with pytest.raises(LicenseNotAccepted):
        ensure_file(spec, home=tmp_path, accept_licenses=False, interactive=True,
                    prompt=lambda _: "no")
    assert server.requests == []
    ensure_file(spec, home=tmp_path, accept_licenses=False, interactive=True,
                prompt=lambda _: "yes", backoff=0)
    assert "research use only" in capsys.readouterr().err


def test_manual_file_flow(tmp_path):
    spec = DownloadSpec(dest="m/file.gz", sha256=DIGEST, manual_instructions="Ask NIST.")
    with pytest.raises(ManualFileRequired) as e:
        ensure_file(spec, home=tmp_path)
    assert "Ask NIST." in str(e.value)
    (tmp_path / "m").mkdir()
    (tmp_path / "m/file.gz").write_bytes(b"wrong")
    with pytest.raises(HashMismatch):
        ensure_file(spec, home=tmp_path)
    assert (tmp_path / "m/file.gz").exists()  # user's file is left alone
    (tmp_path / "m/file.gz").write_bytes(PAYLOAD)
    assert ensure_file(spec, home=tmp_path).verified


def test_file_lock_serializes_and_takes_over_stale(tmp_path):
    target = tmp_path / "x"
    order = []

    def hold():
        with FileLock(target, poll=0.01):
            order.append("a-in")
            time.sleep(0.2)
            order.append("a-out")

    t = threading.Thread(target=hold)
    t.start()
    time.sleep(0.05)
    with FileLock(target, poll=0.01):
        order.append("b-in")
    t.join()
    assert order == ["a-in", "a-out", "b-in"]
    stale = tmp_path / "y.lock"
    stale.write_text("999999 0\n")
    old = time.time() - 3600
    os.utime(stale, (old, old))
    with FileLock(tmp_path / "y", stale_after=60, timeout=2):
        pass
    with pytest.raises(TimeoutError):
        fresh = tmp_path / "z.lock"
        fresh.write_text("1 1\n")
        FileLock(tmp_path / "z", timeout=0.1, poll=0.01).acquire()


def test_check_links(server, tmp_path):
    server.files["/a"] = PAYLOAD
    server.files["/b"] = b"bee"
    specs = [DownloadSpec(dest="a", url=server.url("/a"), sha256=DIGEST),
             DownloadSpec(dest="b", url=server.url("/b"),
                          sha256=hashlib.sha256(b"bee").hexdigest()),
             DownloadSpec(dest="m", sha256=DIGEST, manual_instructions="manual")]
    assert check_links(specs).ok
    server.head = False  # falls back to a ranged GET
    assert check_links(specs).ok
    del server.files["/b"]
    report = check_links(specs)
    assert [e.dest for e in report.failures] == ["b"]
    server.files["/b"] = b"changed"
    assert check_links(specs).ok  # shallow mode does not hash
    deep = check_links(specs, deep=True)
    assert [(e.dest, e.hash_ok) for e in deep.failures] == [("b", False)]
