import pytest

from clonerad.core import RadiometricContext

_ACCEPTANCE_LINES = []


@pytest.fixture
def bench_ctx():
    return RadiometricContext(wavelength=1559.8e-9, coherence_time=19.71e-12)


@pytest.fixture
def verdict():
    """Print and record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2} {name}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
