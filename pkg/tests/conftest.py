"""Prints the acceptance verdicts collected by test_acceptance.py."""

VERDICTS = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(VERDICTS, key=lambda k: (int(k.split()[0]), k)):
        terminalreporter.write_line(VERDICTS[key])
