import pytest

_acceptance_lines = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if item.get_closest_marker("acceptance") is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        doc = (item.function.__doc__ or item.name).strip()
        param = f" [{item.callspec.id}]" if hasattr(item, "callspec") else ""
        status = "PASS" if report.passed else "FAIL"
        _acceptance_lines.append(f"{status}  criterion {doc}{param}  ({report.duration:.2f} s)")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in _acceptance_lines:
        terminalreporter.write_line(line)
