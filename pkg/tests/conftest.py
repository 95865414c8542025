import pytest

_ACCEPTANCE = {}


@pytest.fixture
def report_criterion(request):
    """Record a one-line pass/fail verdict for an acceptance criterion."""

    def record(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {title}: {detail}"
        request.node.user_properties.append(("acceptance", (number, line)))
        print(line)
        return passed

    return record


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    for key, value in report.user_properties:
        if key == "acceptance":
            number, line = value
            _ACCEPTANCE[number] = line


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number])
