"""Shared pytest hooks: the acceptance suite reports one line per criterion."""

import pytest

_ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


class AcceptanceRecorder:
    def __call__(self, number: int, title: str, passed: bool, detail: str) -> None:
        _ACCEPTANCE[number] = (title, bool(passed), detail)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:2d}. {title}: {detail}")
