import pytest

_OUTCOMES: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.fixture
def measured(request):
    """Dict for numbers a criterion test wants echoed in the summary."""
    marker = request.node.get_closest_marker("criterion")
    entry = _OUTCOMES.setdefault(marker.args[0], {"title": marker.args[1], "passed": True, "notes": {}})
    return entry["notes"]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not report.failed:
        return
    entry = _OUTCOMES.setdefault(marker.args[0], {"title": marker.args[1], "passed": True, "notes": {}})
    if report.failed or report.skipped:
        entry["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        entry = _OUTCOMES[number]
        status = "PASS" if entry["passed"] else "FAIL"
        notes = ", ".join(f"{k}={v}" for k, v in entry["notes"].items())
        terminalreporter.write_line(f"criterion {number:>2} {status}: {entry['title']}"
                                    + (f" [{notes}]" if notes else ""))
