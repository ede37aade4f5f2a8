"""Acquisition of source files: verified, resumable downloads into IRDS_HOME.

Partial transfers live at ``<dest>.part`` and are renamed into place only
after the SHA-256 matches; bytes that fail verification are moved to
``<dest>.quarantine`` rather than deleted.
"""

from __future__ import annotations

import hashlib
import http.client
import logging
import os
import re
import shutil
import socket
import sys
import tempfile
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .errors import (FileMissing, HashMismatch, LicenseNotAccepted,
                     ManualFileRequired, NetworkError)

log = logging.getLogger(__name__)

USER_AGENT = f"irdatakit/{__version__}"
EMPTY_SHA256 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
DEFAULT_RETRIES = 5
DEFAULT_BACKOFF = 1.0
MAX_BACKOFF = 60.0
STALE_LOCK_SECONDS = 15 * 60
CHUNK = 1 << 16
_HEX64 = re.compile(r"^[0-9a-f]{64}$")


def irds_home() -> Path:
    return Path(os.environ.get("IRDS_HOME") or "~/.ir_datasets").expanduser()


def licenses_accepted() -> bool:
    return os.environ.get("IRDS_ACCEPT_LICENSES", "").lower() in ("1", "true", "yes")


@dataclass(frozen=True)
class DownloadSpec:
    dest: str
    url: str | None = None
    sha256: str | None = None
    size_hint: int | None = None
    license_notice: str | None = None
    manual_instructions: str | None = None

    def __post_init__(self):
        if (self.url is None) == (self.manual_instructions is None):
            raise ValueError("exactly one of url / manual_instructions is required")
        if self.url is not None and self.sha256 is None:
            raise ValueError("sha256 is required for downloadable files")
        if self.sha256 is not None and not _HEX64.match(self.sha256):
            raise ValueError(f"not a sha256 hex digest: {self.sha256!r}")
        if Path(self.dest).is_absolute() or ".." in Path(self.dest).parts:
            raise ValueError(f"dest must be relative to IRDS_HOME: {self.dest!r}")


@dataclass
class FetchResult:
    path: Path
    bytes_fetched: int = 0
    resumed: bool = False
    verified: bool = True


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def verify(path, sha256: str) -> bool:
    if not os.path.isfile(path):
        raise FileMissing(path)
    return sha256_file(path) == sha256.lower()


def quarantine(path) -> Path:
    target = Path(str(path) + ".quarantine")
    os.replace(path, target)
    return target


class FileLock:
    """Cross-process lock via an exclusively created ``<target>.lock`` file.

    A lock file older than ``stale_after`` seconds is taken over.
    """

    def __init__(self, target, stale_after=STALE_LOCK_SECONDS, poll=0.05, timeout=None):
        self.path = Path(str(target) + ".lock")
        self.stale_after = stale_after
        self.poll = poll
        self.timeout = timeout
        self._held = False

    def acquire(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        deadline = None if self.timeout is None else time.monotonic() + self.timeout
        while True:
            try:
                fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            except FileExistsError:
                self._maybe_take_over()
                if deadline is not None and time.monotonic() > deadline:
                    raise TimeoutError(f"timed out waiting for {self.path}")
                time.sleep(self.poll)
                continue
            with os.fdopen(fd, "w") as f:
                f.write(f"{os.getpid()} {time.time():.0f}\n")
            self._held = True
            return self

    def _maybe_take_over(self):
        try:
            age = time.time() - self.path.stat().st_mtime
        except FileNotFoundError:
            return
        if age > self.stale_after:
            log.warning("taking over stale lock %s (%.0fs old)", self.path, age)
            stale = self.path.with_name(f"{self.path.name}.stale.{os.getpid()}")
            try:
                os.replace(self.path, stale)
                os.unlink(stale)
            except FileNotFoundError:
                pass

    def release(self):
        if self._held:
            self._held = False
            try:
                os.unlink(self.path)
            except FileNotFoundError:
                pass

    def __enter__(self):
        return self.acquire()

    def __exit__(self, *exc):
        self.release()


_TRANSIENT = (urllib.error.URLError, http.client.HTTPException, ConnectionError,
              socket.timeout, TimeoutError, OSError)


class _Broken(Exception):
    """Body ended before the advertised length."""


def _content_total(resp, have):
    if resp.status == 206:
        m = re.match(r"bytes\s+(\d+)-(\d+)/(\d+|\*)", resp.headers.get("Content-Range", ""))
        if m and m.group(3) != "*":
            return int(m.group(3))
        length = resp.headers.get("Content-Length")
        return have + int(length) if length else None
    length = resp.headers.get("Content-Length")
    return int(length) if length else None


def download_resumable(url, dest, sha256, *, retries=DEFAULT_RETRIES,
                       backoff=DEFAULT_BACKOFF, timeout=30.0) -> FetchResult:
    """Fetch ``url`` to ``dest``, resuming with ``Range`` after a broken
    connection when the server supports it, and verify the result."""
    dest = Path(dest)
    dest.parent.mkdir(parents=True, exist_ok=True)
    part = Path(str(dest) + ".part")
    fetched = 0
    resumed = False
    accept_ranges = None  # unknown until the first response
    failures = 0
    while True:
        have = part.stat().st_size if part.exists() else 0
        headers = {"User-Agent": USER_AGENT}
        if have and accept_ranges is not False:
            headers["Range"] = f"bytes={have}-"
        try:
            req = urllib.request.Request(url, headers=headers)
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                status = getattr(resp, "status", None) or 200
                if accept_ranges is None:
                    accept_ranges = resp.headers.get("Accept-Ranges", "").lower() == "bytes"
                if status == 206 and have:
                    mode = "ab"
                    resumed = True
                    accept_ranges = True
                else:
                    if have:
                        accept_ranges = False
                    mode = "wb"
                    have = 0
                total = _content_total(resp, have)
                written = have
                with open(part, mode) as out:
                    while True:
                        chunk = resp.read(CHUNK)
                        if not chunk:
                            break
                        out.write(chunk)
                        written += len(chunk)
                        fetched += len(chunk)
                if total is not None and written < total:
                    raise _Broken(f"got {written} of {total} bytes")
        except urllib.error.HTTPError as exc:
            if exc.code == 416 and have:
                pass  # nothing left to fetch; fall through to verification
            else:
                failures += 1
                if failures > retries:
                    raise NetworkError(f"{url}: HTTP {exc.code} after {retries} retries") from exc
                _sleep(backoff, failures)
                continue
        except (_Broken, *_TRANSIENT) as exc:
            failures += 1
            log.info("download of %s interrupted (%s); attempt %d", url, exc, failures)
            if failures > retries:
                raise NetworkError(f"{url}: {exc} after {retries} retries") from exc
            _sleep(backoff, failures)
            continue
        break
    actual = sha256_file(part)
    if actual != sha256.lower():
        quarantine(part)
        raise HashMismatch(sha256, actual, dest)
    os.replace(part, dest)
    return FetchResult(dest, fetched, resumed, True)


def _sleep(backoff, failures):
    if backoff > 0:
        time.sleep(min(backoff * 2 ** (failures - 1), MAX_BACKOFF))


def _notify(text):
    print(text, file=sys.stderr, flush=True)


def _license_gate(notice, accept, interactive, prompt):
    if accept:
        _notify(notice)
        return
    if interactive:
        _notify(notice)
        answer = prompt("Type 'yes' to accept these terms and continue: ")
        if answer.strip().lower() == "yes":
            return
    raise LicenseNotAccepted(notice)


def ensure_file(spec: DownloadSpec, *, home=None, accept_licenses=None,
                interactive=None, prompt=input, retries=DEFAULT_RETRIES,
                backoff=DEFAULT_BACKOFF, timeout=30.0) -> FetchResult:
    home = Path(home) if home is not None else irds_home()
    path = home / spec.dest
    if path.exists():
        if spec.sha256 is None or verify(path, spec.sha256):
            return FetchResult(path, 0, False, True)
        if spec.url is None:
            raise HashMismatch(spec.sha256, sha256_file(path), path)
        log.warning("%s fails verification; moving to quarantine and re-fetching", path)
        quarantine(path)
    if spec.url is None:
        raise ManualFileRequired(spec.manual_instructions, dest=path)
    if spec.license_notice:
        if accept_licenses is None:
            accept_licenses = licenses_accepted()
        if interactive is None:
            interactive = sys.stdin is not None and sys.stdin.isatty()
        _license_gate(spec.license_notice, accept_licenses, interactive, prompt)
    with FileLock(path):
        if path.exists() and verify(path, spec.sha256):
            return FetchResult(path, 0, False, True)
        return download_resumable(spec.url, path, spec.sha256, retries=retries,
                                  backoff=backoff, timeout=timeout)


@dataclass
class LinkStatus:
    dest: str
    url: str
    reachable: bool
    status: int | None = None
    hash_ok: bool | None = None
    error: str | None = None

    @property
    def ok(self):
        return self.reachable and self.hash_ok is not False


@dataclass
class LinkReport:
    entries: list = field(default_factory=list)

    @property
    def failures(self):
        return [e for e in self.entries if not e.ok]

    @property
    def ok(self):
        return not self.failures


def _probe(url, timeout):
    headers = {"User-Agent": USER_AGENT}
    try:
        req = urllib.request.Request(url, headers=headers, method="HEAD")
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return getattr(resp, "status", None) or 200, None
    except urllib.error.HTTPError as exc:
        if exc.code not in (405, 501):
            return exc.code, f"HTTP {exc.code}"
    except _TRANSIENT as exc:
        return None, str(exc)
    # HEAD refused: fall back to the first 64 KiB
    try:
        req = urllib.request.Request(url, headers={**headers, "Range": f"bytes=0-{CHUNK - 1}"})
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            resp.read(CHUNK)
            return getattr(resp, "status", None) or 200, None
    except urllib.error.HTTPError as exc:
        return exc.code, f"HTTP {exc.code}"
    except _TRANSIENT as exc:
        return None, str(exc)


def check_links(specs, *, deep=False, timeout=30.0, retries=0, backoff=0.0) -> LinkReport:
    report = LinkReport()
    for spec in specs:
        if spec.url is None:
            continue
        status, error = _probe(spec.url, timeout)
        entry = LinkStatus(spec.dest, spec.url, error is None, status, None, error)
        if entry.reachable and deep:
            tmp = Path(tempfile.mkdtemp(prefix="irds-check-"))
            try:
                download_resumable(spec.url, tmp / "file", spec.sha256,
                                   retries=retries, backoff=backoff, timeout=timeout)
                entry.hash_ok = True
            except HashMismatch as exc:
                entry.hash_ok = False
                entry.error = str(exc)
            except NetworkError as exc:
                entry.reachable = False
                entry.error = str(exc)
            finally:
                shutil.rmtree(tmp, ignore_errors=True)
        report.entries.append(entry)
    return report
