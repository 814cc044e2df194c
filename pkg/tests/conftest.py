from __future__ import annotations

from collections import OrderedDict

from hypothesis import HealthCheck, settings

settings.register_profile(
    "properties",
    max_examples=1000,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("properties")

_CRITERIA: "OrderedDict[int, dict]" = OrderedDict()
_NODE_TO_CRITERION: dict[str, int] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion a test belongs to")


def pytest_collection_finish(session):
    # runs after deselection, so -k filters shrink the per-criterion totals
    for item in session.items:
        mark = item.get_closest_marker("criterion")
        if mark is None:
            continue
        number, title = mark.args
        entry = _CRITERIA.setdefault(number, {"title": title, "passed": 0, "failed": 0, "nodes": set()})
        entry["nodes"].add(item.nodeid)
        _NODE_TO_CRITERION[item.nodeid] = number


def pytest_runtest_logreport(report):
    number = _NODE_TO_CRITERION.get(report.nodeid)
    if number is None:
        return
    entry = _CRITERIA[number]
    if report.failed:
        entry.setdefault("failed_nodes", set()).add(report.nodeid)
    elif report.when == "call" and report.passed:
        entry.setdefault("passed_nodes", set()).add(report.nodeid)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        failed = entry.get("failed_nodes", set())
        passed = entry.get("passed_nodes", set()) - failed
        total = len(entry["nodes"])
        ran = len(passed) + len(failed)
        if ran < total:
            status = "INCOMPLETE"
        else:
            status = "PASS" if not failed else "FAIL"
        terminalreporter.write_line(
            f"criterion {number}: {status}  {entry['title']}  ({len(passed)}/{total} checks passed)"
        )
