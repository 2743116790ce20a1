import pytest


def pytest_terminal_summary(terminalreporter):
    """Replay the acceptance-criterion verdict lines after output capture ends."""
    lines = getattr(pytest, "acceptance_verdicts", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
