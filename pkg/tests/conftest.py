import pytest

CRITERIA = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            CRITERIA.setdefault(mark.args[0], []).append((item.nodeid, None))


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_logreport(report):
    for number, entries in CRITERIA.items():
        for k, (nodeid, outcome) in enumerate(entries):
            if nodeid != report.nodeid:
                continue
            if report.when == "call" or report.failed:
                if outcome != "failed":
                    entries[k] = (nodeid, "failed" if report.failed else report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        outcomes = [o for _, o in CRITERIA[number]]
        if any(o is None for o in outcomes):
            status = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            status = "PASS"
        else:
            status = "FAIL"
        name = CRITERIA[number][0][0].split("::")[-1]
        terminalreporter.write_line(f"criterion {number:>2}: {status:<7} {name}")
