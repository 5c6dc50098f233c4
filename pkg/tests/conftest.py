import numpy as np
import pytest
from hypothesis import settings

from errcons.core import AlignedOutcomes

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

# (criterion number, description) -> "PASS" / "FAIL" / "SKIP"
ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(num, label): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    key = tuple(marker.args)
    if report.when == "call" or (report.when == "setup" and report.skipped):
        status = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
        if ACCEPTANCE.get(key) != "FAIL":
            ACCEPTANCE[key] = status


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (num, label), status in sorted(ACCEPTANCE.items()):
        terminalreporter.write_line(f"criterion {num}: {status}  {label}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def outcomes_from_rows(rows, observers=None):
    rows = np.asarray(rows, dtype=bool)
    observers = observers or [f"o{r}" for r in range(rows.shape[0])]
    trials = [f"t{c:05d}" for c in range(rows.shape[1])]
    return AlignedOutcomes(tuple(observers), tuple(trials), rows)
