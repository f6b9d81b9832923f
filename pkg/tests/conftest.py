import time

import pytest
from hypothesis import settings

settings.register_profile("lidkit", deadline=None, max_examples=60)
settings.load_profile("lidkit")

SUITE_BUDGET_S = 60.0

# criterion number -> list of (part, passed, detail), filled by the acceptance tests
_criteria: dict[int, list[tuple[str, bool, str]]] = {}
_started = time.perf_counter()


@pytest.fixture
def criterion():
    """Record one part of an acceptance criterion for the end-of-run summary."""

    def record(number: int, part: str, passed: bool, detail: str) -> bool:
        _criteria.setdefault(number, []).append((part, bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    elapsed = time.perf_counter() - _started
    _criteria.setdefault(8, []).append(
        ("suite runtime", elapsed < SUITE_BUDGET_S, f"{elapsed:.1f} s for this run (limit {SUITE_BUDGET_S:.0f} s)")
    )
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_criteria):
        parts = _criteria[number]
        verdict = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        tr.write_line(f"criterion {number}: {verdict}")
        for part, ok, detail in parts:
            tr.write_line(f"    [{'pass' if ok else 'FAIL'}] {part}: {detail}")


def pytest_sessionfinish(session, exitstatus):
    # runs before the terminal summary; an over-budget run fails the session
    if _criteria and time.perf_counter() - _started >= SUITE_BUDGET_S and exitstatus == 0:
        session.exitstatus = 1
