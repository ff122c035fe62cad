import sys
import numpy as np
import pytest

from featdisc.datasets import SyntheticSpec, generate_synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_synthetic():
    ds, truth = generate_synthetic(SyntheticSpec("smooth-nonlinear", field_count=4, row_count=4000, noise_sigma=1.0, seed=3))
    return ds, truth


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance.LINES:
            terminalreporter.write_line(line)
