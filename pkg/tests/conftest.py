import pytest

_VERDICTS: list[tuple[str, bool, str]] = []


@pytest.fixture(scope="session")
def verdicts():
    """Collects one (criterion, passed, detail) entry per acceptance check."""
    return _VERDICTS


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _VERDICTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
