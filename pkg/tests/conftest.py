import numpy as np
import pytest

from nab2lab.lcg import Lcg64
from nab2lab.poly import PolyField

# lines collected by test_acceptance, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_field(rng: np.random.Generator, shape, degree: int, cap: int, amp: float = 1.0) -> PolyField:
    c = np.zeros(tuple(shape) + (cap + 1, cap + 1))
    i, j = np.indices((cap + 1, cap + 1))
    mask = i + j <= degree
    c[..., mask] = rng.uniform(-amp, amp, size=tuple(shape) + (int(mask.sum()),))
    return PolyField(c, cap)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def lcg():
    return Lcg64(12345)
