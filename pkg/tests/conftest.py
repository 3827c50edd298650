import pytest

_OUTCOMES: dict[int, list[tuple[str, str]]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = getattr(report, "criterion", None)
    if crit is not None:
        _OUTCOMES.setdefault(crit, []).append((report.nodeid, report.outcome))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker:
        report.criterion = marker.kwargs.get("criterion", marker.args[0] if marker.args else None)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_OUTCOMES):
        results = _OUTCOMES[crit]
        ok = all(o == "passed" for _, o in results)
        terminalreporter.write_line(
            f"criterion {crit}: {'PASS' if ok else 'FAIL'} "
            f"({sum(o == 'passed' for _, o in results)}/{len(results)} checks)")
