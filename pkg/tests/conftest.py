import pytest

_RESULTS: dict[int, tuple[str, bool, str]] = {}


class Criterion:
    """Collects one pass/fail line per acceptance criterion."""

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.checks: list[tuple[str, bool]] = []

    def check(self, label: str, ok: bool) -> bool:
        self.checks.append((label, bool(ok)))
        return bool(ok)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(ok for _, ok in self.checks)

    def finish(self) -> None:
        detail = "; ".join(f"{label}{'' if ok else ' [FAILED]'}" for label, ok in self.checks)
        _RESULTS[self.number] = (self.title, self.passed, detail)
        line = f"{'PASS' if self.passed else 'FAIL'} criterion {self.number:2d} {self.title}: {detail}"
        print(line)
        failed = [label for label, ok in self.checks if not ok]
        assert not failed, f"criterion {self.number} failed: {failed}"


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        title, ok, detail = _RESULTS[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {n:2d} {title}: {detail}")
