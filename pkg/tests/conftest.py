import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from icnet.core import Dataset  # noqa: E402


def random_dataset(rng, n, d, tmax=3.0):
    """Small random dataset with all three censoring types represented."""
    kind = rng.integers(0, 3, size=n)
    kind[: min(n, 3)] = np.arange(min(n, 3))
    u = rng.uniform(0.1, tmax, size=n)
    v = u + rng.uniform(0.1, tmax, size=n)
    d1 = (kind == 0).astype(int)
    d2 = (kind == 1).astype(int)
    v = np.where(d1 == 1, u, v)
    u = np.where(kind == 2, v, u)
    return Dataset(u, v, d1, d2, rng.normal(size=(n, d)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
