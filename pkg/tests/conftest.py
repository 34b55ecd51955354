import pytest

_results = {}


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        crit = report.user_properties and dict(report.user_properties).get("criterion")
        if crit:
            _results[crit] = report.outcome


@pytest.fixture(autouse=True)
def _tag_criterion(request, record_property):
    marker = request.node.get_closest_marker("criterion")
    if marker is not None:
        record_property("criterion", marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), outcome in sorted(_results.items()):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}  {status}  {title}")
