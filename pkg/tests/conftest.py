"""Echo the acceptance-criterion pass/fail lines after the test run, so
they are visible under pytest's default output capture."""

import sys


def pytest_terminal_summary(terminalreporter):
    lines = []
    for name, mod in sys.modules.items():
        if name.rpartition(".")[2] == "test_acceptance":
            lines = getattr(mod, "CRITERION_LINES", [])
            break
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
