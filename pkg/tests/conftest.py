import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from moistpe import ForcingSpec, PhysParams, make_grid

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def g8():
    return make_grid(8, 8, 8)


@pytest.fixture
def params():
    return PhysParams()


@pytest.fixture
def forced():
    return PhysParams(Q1=ForcingSpec("mode", 2.0, (1, 1, 1)), Q2=ForcingSpec("bump", 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record a one-line pass/fail verdict for the terminal summary."""

    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _VERDICTS.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
