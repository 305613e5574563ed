import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def record(line: str) -> None:
    """Collect a one-line acceptance verdict for the terminal summary."""
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def biv(rng):
    """Standard bivariate Gaussian sample, n=400."""
    return rng.standard_normal((400, 2))


@pytest.fixture
def diag_u():
    return np.array([1.0, 1.0]) / np.sqrt(2.0)
