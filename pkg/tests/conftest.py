import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture
def home(tmp_path, monkeypatch):
    """Fresh IRDS_HOME with licence notices pre-accepted."""
    h = tmp_path / "home"
    h.mkdir()
    monkeypatch.setenv("IRDS_HOME", str(h))
    monkeypatch.setenv("IRDS_ACCEPT_LICENSES", "1")
    monkeypatch.delenv("IRDS_MIRROR_URL", raising=False)
    return h


@pytest.fixture
def server():
    from httpfixture import FixtureServer

    srv = FixtureServer()
    yield srv
    srv.close()


_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    failed = rep.failed or (rep.when == "setup" and rep.skipped)
    if failed or (rep.when == "call" and rep.passed and number not in _ACCEPTANCE):
        _ACCEPTANCE[number] = ("FAIL" if failed else "PASS", title)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        state, title = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d} {state}: {title}")
