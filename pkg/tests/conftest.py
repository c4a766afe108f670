import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running Monte-Carlo checks")


def random_ball_points(rng, count, n, rmax=0.999):
    g = rng.normal(size=(count, 2 * n))
    s = g / np.linalg.norm(g, axis=1, keepdims=True)
    r = rmax * rng.random(count) ** (1.0 / (2 * n))
    return r[:, None] * (s[:, :n] + 1j * s[:, n:])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def e1():
    return np.array([1.0, 0.0], dtype=complex)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion and return the verdict."""
    def record(number, passed, detail, seconds):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}  ({seconds:.1f} s)"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
