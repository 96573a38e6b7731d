from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("default")

# criterion number -> (title, [(test id, outcome)])
_ACCEPTANCE: dict[int, tuple[str, list[tuple[str, str]]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    # Setup/teardown only matter when they break; the call phase always counts.
    if report.when == "call" or report.outcome != "passed":
        number, title = marker.args
        _ACCEPTANCE.setdefault(number, (title, []))[1].append((item.name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, outcomes = _ACCEPTANCE[number]
        failed = [name for name, status in outcomes if status == "failed"]
        passed = sum(status == "passed" for _, status in outcomes)
        verdict = "FAIL" if failed else ("PASS" if passed else "SKIP")
        detail = f"{passed}/{len(outcomes)} passed"
        if failed:
            detail += "; failed: " + ", ".join(failed)
        terminalreporter.write_line(f"criterion {number:>2}  {verdict}  {title}  ({detail})")
