import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def random_simplex(rng: np.random.Generator, d: int, min_quality: float = 0.2) -> np.ndarray:
    """A random non-degenerate simplex with bounded aspect ratio."""
    from math import factorial

    while True:
        x = rng.uniform(-1, 1, size=(d + 1, d))
        vol = abs(np.linalg.det(x[1:] - x[0])) / factorial(d)
        hmax = max(np.linalg.norm(x[i] - x[j]) for i in range(d + 1) for j in range(i))
        if vol / hmax**d > min_quality / factorial(d) * 0.5:
            return x


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
