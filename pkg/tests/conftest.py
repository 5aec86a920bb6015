import pytest

CRITERIA: dict[int, tuple[bool, str]] = {}
N_CRITERIA = 10


@pytest.fixture
def record_criterion():
    def record(number: int, ok: bool, detail: str = ""):
        CRITERIA[number] = (bool(ok), detail)
        print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in range(1, N_CRITERIA + 1):
        ok, detail = CRITERIA.get(number, (False, "not completed"))
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
