from __future__ import annotations

import pytest

ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}
CRITERIA = range(1, 14)


@pytest.fixture
def criterion():
    """record(number, ok, detail): collected into the per-criterion summary."""

    def record(num: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE.setdefault(num, []).append((bool(ok), detail))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in CRITERIA:
        rows = ACCEPTANCE.get(num)
        if rows is None:
            terminalreporter.write_line(f"criterion {num:2d}: FAIL  (not run or errored)")
            continue
        status = "PASS" if all(ok for ok, _ in rows) else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {status}  " + "; ".join(d for _, d in rows))
