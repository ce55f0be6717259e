import numpy as np
import pytest

from lipapprox.grid import build_grid, field_from_function


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def line(n, lo=-1.0, hi=1.0):
    return build_grid(1, (lo, hi), n)


def sample(grid, rule):
    return field_from_function(grid, rule)


ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def record():
    """Log one pass/fail line for an acceptance criterion."""

    def _record(label: str, checks: dict, detail: str = "") -> bool:
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        text = detail + (f"  [failed: {', '.join(failed)}]" if failed else "")
        ACCEPTANCE.append((label, ok, text))
        print(f"{'PASS' if ok else 'FAIL'}  {label}: {text}")
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, text in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {text}")
