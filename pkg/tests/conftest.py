import pytest

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record():
    """Store one verdict line per acceptance criterion and print it."""

    def _record(n: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE[n] = (ok, detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}")
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} | {detail}")
