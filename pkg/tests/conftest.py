import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("qbstoch", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("qbstoch")

ACCEPTANCE_LINES = {}


def record_criterion(number: int, ok: bool, summary: str) -> None:
    ACCEPTANCE_LINES[number] = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {summary}"
    print(ACCEPTANCE_LINES[number])


@pytest.fixture
def criterion():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
