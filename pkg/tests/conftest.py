"""Shared test infrastructure.

Acceptance tests register their PASS/FAIL lines here so the criterion
results survive output capturing and land in the terminal summary of
every pytest invocation.
"""

acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
