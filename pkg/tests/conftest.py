import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "passed": True, "xfail": 0, "details": []})
    if hasattr(report, "wasxfail"):
        entry["xfail"] += 1
    if report.failed:
        entry["passed"] = False
    if report.when == "call":
        prefix = f"[{item.name}: xfail] " if hasattr(report, "wasxfail") else ""
        entry["details"] += [prefix + v for k, v in item.user_properties if k == "detail"]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "PASS" if entry["passed"] else "FAIL"
        if entry["xfail"]:
            status += f" ({entry['xfail']} check xfail)"
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {entry['title']}")
        for detail in entry["details"]:
            terminalreporter.write_line(f"               {detail}")
