import numpy as np
import pytest
from scipy.linalg import expm

from cvbound.gaussian import symplectic_form


def random_symplectic(rng, n, spread=0.6):
    h = rng.normal(size=(2 * n, 2 * n)) * spread
    return expm(symplectic_form(n) @ (h + h.T))


def random_state(rng, n, spread=0.6, thermal=0.5):
    """S diag(nu) S^T with nu >= 1: physical by construction."""
    s = random_symplectic(rng, n, spread)
    nu = 1.0 + rng.exponential(thermal, n)
    return s @ np.diag(np.repeat(nu, 2)) @ s.T


def tmsv(v):
    """Two-mode squeezed vacuum with exp(-2r) = v."""
    c = 0.5 * (v + 1.0 / v)
    s = 0.5 * (1.0 / v - v)
    z = np.diag([1.0, -1.0])
    i2 = np.eye(2)
    return np.block([[c * i2, s * z], [s * z, c * i2]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one PASS/FAIL line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
