import pytest

from colombeau.asymptotics import EpsGrid
from colombeau.ge import TestBattery


@pytest.fixture(scope="session")
def battery():
    return TestBattery()


@pytest.fixture(scope="session")
def short_battery():
    return TestBattery(grid=EpsGrid(0.5, 4, 20))


ACCEPTANCE: dict = {}


@pytest.fixture
def criterion():
    """record(k, ok, detail) for the acceptance summary, then assert ok."""

    def record(k, ok, detail=""):
        ACCEPTANCE[k] = (bool(ok), detail)
        assert ok, f"criterion {k}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, 12):
        ok, detail = ACCEPTANCE.get(k, (False, "did not report (test errored or was deselected)"))
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
