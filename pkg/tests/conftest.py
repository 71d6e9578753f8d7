import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from multibarrier import BarrierSchedule, BarrierSpec, MarketParams  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def market():
    return MarketParams(spot=100.0, rate=0.03, vol=0.25)


@pytest.fixture
def barriers():
    return BarrierSpec(80.0, 125.0)


@pytest.fixture
def coupon_schedule():
    # four adjacent quarterly coupon windows starting in three months
    return BarrierSchedule.coupon_strip(0.25, 0.25, 4)


@pytest.fixture
def acceptance_log():
    def log(criterion: str, passed: bool, detail: str):
        line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
