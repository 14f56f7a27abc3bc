import pytest

from magicsim import _backend
from magicsim.crossbar import build_array

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def nominal():
    return build_array()


@pytest.fixture(params=["compiled", "pure"])
def backend(request, monkeypatch):
    """Run the test once per available stepping kernel."""
    if request.param == "compiled":
        if _backend.compiled is None:
            pytest.skip("compiled kernel not built")
        monkeypatch.setattr(_backend, "kernel", _backend.compiled)
    else:
        monkeypatch.setattr(_backend, "kernel", _backend.pure)
    return request.param


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
