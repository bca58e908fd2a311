import pytest

# criterion number -> (passed, line); filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def report():
    def _report(number, title, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  criterion {number}: {title} -- {detail}"
        ACCEPTANCE[number] = (passed, line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number][1])
