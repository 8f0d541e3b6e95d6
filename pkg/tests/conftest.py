import numpy as np
import pytest

from dmclusts.dataset import generate_synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def planted():
    """Two 3-cluster labelings, each carried by two 30-d views."""
    spec = [(3, (0, 1), 30, 10.0, 0.5), (3, (2, 3), 30, 10.0, 0.5)]
    return generate_synthetic(500, spec, seed=1)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[num])
