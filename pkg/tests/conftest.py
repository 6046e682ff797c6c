import pytest

_ACCEPTANCE = []


class AcceptanceLog:
    def record(self, criterion: str, passed: bool, detail: str = ""):
        line = f"[{'PASS' if passed else 'FAIL'}] {criterion}" + (f" -- {detail}" if detail else "")
        _ACCEPTANCE.append(line)
        print(line)
        return passed


@pytest.fixture
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
