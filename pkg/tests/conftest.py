import pytest

_ACCEPTANCE = {}


@pytest.fixture
def verdict():
    """Record one acceptance line: ``verdict(n, ok, detail)``."""
    def record(n, ok, detail=""):
        _ACCEPTANCE[n] = (bool(ok), detail)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
