import pytest

_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_KEY] = []


@pytest.fixture()
def criterion(request):
    """Record one acceptance line, then assert it.

    Usage: ``criterion(number, title, ok, detail)``. Lines are echoed in the
    terminal summary so a plain ``pytest -v`` run shows every verdict.
    """
    lines = request.config.stash[_KEY]

    def record(number: int, title: str, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}"
        lines.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
