import threading

import pytest


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    # expose the call-phase outcome to fixtures (acceptance pass/fail banner)
    outcome = yield
    report = outcome.get_result()
    if report.when == "call":
        item.rep_call = report


class VirtualClock:
    """Deterministic clock whose sleep() advances time instead of waiting."""

    def __init__(self, start: float = 0.0):
        self._now = start
        self._lock = threading.Lock()

    def __call__(self) -> float:
        with self._lock:
            return self._now

    def sleep(self, seconds: float) -> None:
        with self._lock:
            self._now += seconds

    def advance(self, seconds: float) -> None:
        self.sleep(seconds)


@pytest.fixture
def virtual_clock():
    return VirtualClock()
