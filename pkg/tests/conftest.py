import pytest

_LINES = {}


@pytest.fixture
def record():
    """Store the verdict line for one acceptance criterion; returns ``ok`` for asserting."""

    def _record(number, name, ok, metric):
        _LINES[number] = f"criterion {number:2d} {name}: {'PASS' if ok else 'FAIL'}  {metric}"
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_LINES):
        terminalreporter.write_line(_LINES[k])
