"""Shared pytest configuration (keeps the tests directory importable)."""

import criteria_log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not criteria_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(criteria_log.RESULTS):
        name, passed, seconds = criteria_log.RESULTS[num]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(
            f"criterion {num:2d} ({name}): {verdict} [{seconds:.2f} s]"
        )
