import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# (number, title) -> "PASS" | "FAIL", filled from the acceptance tests' reports
_criteria: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion a test checks")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    report = outcome.get_result()
    key = tuple(marker.args)
    bad = report.failed or (report.when == "call" and report.skipped)
    if bad or _criteria.get(key) == "FAIL":
        _criteria[key] = "FAIL"
    else:
        _criteria[key] = "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), verdict in sorted(_criteria.items()):
        terminalreporter.write_line(f"criterion {number:>2}  {verdict}  {title}")
