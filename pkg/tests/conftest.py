"""Shared test plumbing: the acceptance-summary terminal report."""

# Populated by test_acceptance.py; printed after the run so the one-line
# verdict per shipped guarantee survives pytest's output capture.
acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.write_sep("-", "acceptance summary")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
