import pytest

_CRITERIA = {}


def _criterion(item):
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return None
    number = mark.kwargs.get("number", mark.args[0] if mark.args else None)
    desc = mark.kwargs.get("description", mark.args[1] if len(mark.args) > 1 else "")
    return number, desc


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    crit = _criterion(item)
    if crit is None:
        return
    number, desc = crit
    entry = _CRITERIA.setdefault(number, {"description": desc, "passed": True, "tests": []})
    if report.when == "call" or report.failed or report.skipped:
        ok = report.passed and not report.skipped
        if report.when == "call" or not ok:
            entry["tests"].append((item.name, ok))
            entry["passed"] &= ok


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "PASS" if entry["passed"] and entry["tests"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {entry['description']}")
