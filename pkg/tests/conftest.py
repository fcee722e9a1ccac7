from collections import defaultdict

import pytest

_RESULTS = defaultdict(lambda: {"title": "", "passed": True, "seconds": 0.0, "details": []})


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    entry = _RESULTS[number]
    entry["title"] = title
    entry["seconds"] += report.duration
    if report.failed:
        entry["passed"] = False
    if report.when == "call":
        entry["details"].extend(v for k, v in report.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        entry = _RESULTS[number]
        status = "PASS" if entry["passed"] else "FAIL"
        line = f"criterion {number:>2}: {status}  {entry['title']} ({entry['seconds']:.1f} s)"
        terminalreporter.write_line(line)
        for detail in entry["details"]:
            terminalreporter.write_line(f"               {detail}")
