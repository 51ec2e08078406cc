import pytest

_ACCEPTANCE: list[str] = []


class Criterion:
    """Collects the checks of one acceptance criterion and records a single verdict line."""

    def __init__(self, number: int, title: str, budget: float | None):
        self.number, self.title, self.budget = number, title, budget
        self.failures: list[str] = []
        self.details: list[str] = []

    def check(self, ok: bool, what: str) -> None:
        (self.details if ok else self.failures).append(what)

    def finish(self, seconds: float) -> None:
        if self.budget is not None and seconds > self.budget:
            self.failures.append(f"runtime {seconds:.1f}s exceeds {self.budget:g}s")
        status = "PASS" if not self.failures else "FAIL"
        if self.failures:
            info = "; ".join(self.failures)
        else:
            info = f"{len(self.details)} checks ok; " + "; ".join(self.details[-3:])
        _ACCEPTANCE.append(f"[{status}] criterion {self.number:>2} {self.title} ({seconds:.2f}s): {info}")
        assert not self.failures, "; ".join(self.failures)


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split()[0])):
            terminalreporter.write_line(line)
