"""Shared test plumbing: the acceptance-criteria result board.

Acceptance tests record one labeled verdict per criterion through
`record_criterion`; the results are printed as a dedicated section at the
end of every pytest run so each criterion shows a single pass/fail line.
"""

_CRITERIA: list[tuple[str, bool, str]] = []


def record_criterion(name: str, passed: bool, detail: str) -> None:
    _CRITERIA.append((name, bool(passed), detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _CRITERIA:
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{verdict}] {name}: {detail}")
