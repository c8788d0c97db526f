import pytest

from nleit.atomic import builtin_system

_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def rb87():
    return builtin_system("Rb87", 333.15)


@pytest.fixture(scope="session")
def rb85():
    return builtin_system("Rb85", 333.15)


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line per acceptance criterion, echoed in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
