import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rbdsde.paths import PathEnsemble, simulate

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_ensemble() -> PathEnsemble:
    return simulate(M=400, N=10, T=1.0, seed=11)


@pytest.fixture(scope="session")
def medium_ensemble() -> PathEnsemble:
    return simulate(M=4000, N=20, T=1.0, seed=12)


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b))) / scale


ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> None:
    """Store and print one acceptance verdict line, then fail the test if it did not pass."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
