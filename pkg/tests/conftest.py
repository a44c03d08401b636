import pytest

_CRITERIA: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def criterion():
    """``criterion(n, name, ok, detail)`` records one acceptance line."""

    def record(n, name, ok, detail=""):
        _CRITERIA.append((n, name, bool(ok), detail))
        print(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {name}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n, name, ok, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {name}  {detail}")
