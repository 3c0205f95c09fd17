import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

_CRITERIA = {}
_NOTES = {}


@pytest.fixture
def note(request):
    """Attach a one-line measurement to the acceptance summary of this test's criterion."""
    mark = request.node.get_closest_marker("criterion")

    def add(text):
        _NOTES.setdefault(mark.args[0], []).append(text)

    return add


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion implemented by a test")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    ok = call.excinfo is None
    if call.when == "setup" and ok:
        return
    if call.when == "call" or not ok:
        prev = _CRITERIA.get(n, (title, True))[1]
        _CRITERIA[n] = (title, prev and ok)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok = _CRITERIA[n]
        extra = "; ".join(_NOTES.get(n, []))
        terminalreporter.write_line(
            f"criterion {n} [{'PASS' if ok else 'FAIL'}] {title}" + (f" ({extra})" if extra else "")
        )
