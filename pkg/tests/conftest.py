import pytest

RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[RESULTS] = []


@pytest.fixture
def report(request):
    """Record one acceptance line; returns ``passed`` so tests can assert on it."""
    def record(name: str, passed: bool, detail: str) -> bool:
        request.config.stash[RESULTS].append((name, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter, config):
    rows = config.stash.get(RESULTS, [])
    if rows:
        terminalreporter.section("acceptance criteria")
        for name, ok, detail in rows:
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
