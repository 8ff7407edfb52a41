import pytest

_RESULTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Print and record one PASS/FAIL line, then assert on it."""
    lines = request.config.stash.setdefault(_RESULTS, [])

    def report(label: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        print(line)
        lines.append(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_RESULTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
