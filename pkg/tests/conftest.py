"""Shared fixtures: parameter sets and cached spectra."""

import numpy as np
import pytest

from sovkit.model import random_params
from sovkit.spectrum import enumerate_spectrum


@pytest.fixture(scope="session")
def gl3_n3():
    return random_params(3, 3, seed=1)


@pytest.fixture(scope="session")
def gl3_n2():
    return random_params(3, 2, seed=11)


@pytest.fixture(scope="session")
def spectrum_gl3_n3(gl3_n3):
    return enumerate_spectrum(gl3_n3)


@pytest.fixture(scope="session")
def spectrum_gl3_n2(gl3_n2):
    return enumerate_spectrum(gl3_n2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[num])
