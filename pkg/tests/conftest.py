import pytest

_LINES: list[str] = []


@pytest.fixture(scope="session")
def report():
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def add(criterion: int, ok: bool, detail: str) -> bool:
        _LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
        print(_LINES[-1])
        return ok

    return add


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
