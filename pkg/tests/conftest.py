import pytest

ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


@pytest.fixture
def verdict(request):
    """Record one acceptance line: ``verdict(number, passed, text, details)``."""
    lines = request.config.stash[ACCEPTANCE_LINES]

    def record(number, passed, text, details=()):
        lines.append(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {text}")
        for d in details:
            lines.append(f"              {d}")
        print(lines[-1 - len(details)])
        for d in details:
            print(f"    {d}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
