import pytest
from hypothesis import settings

# compiled kernels make the first example slow
settings.register_profile("basinforge", deadline=None, max_examples=100)
settings.load_profile("basinforge")

_ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def record():
    """Record one acceptance line; all lines are repeated in the terminal summary."""

    def _record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
