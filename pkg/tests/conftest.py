import pytest

_VERDICTS = {}


@pytest.fixture(scope="session")
def verdict():
    """Record one acceptance line: ``verdict("C3", ok, "detail")``."""

    def record(key, ok, detail=""):
        _VERDICTS[key] = (bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")

    def order(key):
        head, _, tail = key[1:].partition("-")
        return int(head), tail

    for key in sorted(_VERDICTS, key=order):
        ok, detail = _VERDICTS[key]
        terminalreporter.write_line(f"{key:<12} {'PASS' if ok else 'FAIL'}  {detail}")
