import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> [title, all phases passed, call phase ran]
_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    report = outcome.get_result()
    number, title = int(marker.args[0]), marker.args[1]
    entry = _criteria.setdefault(number, [title, True, False])
    if report.failed or (report.skipped and report.when == "call"):
        entry[1] = False
    if report.when == "call":
        entry[2] = True


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok, ran = _criteria[number]
        status = "PASS" if ok and ran else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}")
