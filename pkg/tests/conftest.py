import numpy as np
import pytest

from pudsim.profile import PRESETS


@pytest.fixture
def h512():
    return PRESETS["mfrH-512"]


@pytest.fixture
def demo():
    return PRESETS["demo-8"]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def record():
    """Collect one verdict line per acceptance criterion for the summary."""
    def _rec(criterion: int, ok: bool, detail: str) -> None:
        _ACCEPTANCE.append(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
    return _rec


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
