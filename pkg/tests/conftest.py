"""Acceptance-criterion bookkeeping.

Tests marked ``@pytest.mark.criterion(n, title)`` are grouped by criterion
and a PASS/FAIL/SKIP line is printed for each at the end of the run. A
criterion passes only when all of its tests pass.
"""

import time

import pytest

_RANK = {"PASS": 0, "SKIP": 1, "FAIL": 2}
_results: dict[int, dict] = {}


@pytest.fixture(autouse=True)
def _tag_criterion(request):
    marker = request.node.get_closest_marker("criterion")
    if marker is not None:
        number, title = marker.args
        request.node.user_properties.append(("criterion", (number, title)))
    yield


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when != "call" and report.outcome == "passed":
        return
    number, title = props["criterion"]
    status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
    entry = _results.setdefault(number, {"title": title, "status": "PASS", "seconds": 0.0, "notes": []})
    if _RANK[status] > _RANK[entry["status"]]:
        entry["status"] = status
    entry["seconds"] += report.duration
    if status == "SKIP" and isinstance(report.longrepr, tuple):
        entry["notes"].append(report.longrepr[2])


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        e = _results[number]
        note = f" ({'; '.join(e['notes'])})" if e["notes"] else ""
        terminalreporter.write_line(
            f"criterion {number} [{e['title']}]: {e['status']} in {e['seconds']:.2f}s{note}"
        )


@pytest.fixture
def stopwatch():
    start = time.perf_counter()
    return lambda: time.perf_counter() - start
