import pytest

# criterion number -> (passed, detail), filled by the acceptance suite
CRITERIA = {}


@pytest.fixture
def criterion():
    def record(number: int, passed: bool, detail: str = ""):
        CRITERIA[number] = (bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        passed, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
