import pytest

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance_line():
    """Record the one-line verdict of an acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[key])
