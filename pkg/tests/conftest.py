import pytest
from hypothesis import settings

from sdrdiff import AcquisitionParams, Geometry

settings.register_profile("default", deadline=None)
settings.load_profile("default")

D0 = 2.3e-9


@pytest.fixture
def cylinder():
    return Geometry("cylinder", 5e-6, D0)


@pytest.fixture
def acq():
    return AcquisitionParams(gradient=0.216)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion and assert it."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
