import sys

import numpy as np
import pytest

from cbopt.problems import Normal, Uniform, h1, h2


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def uniform_law():
    return Uniform(50.0, 150.0)


@pytest.fixture
def normal_law():
    return Normal(100.0, 100.0)


@pytest.fixture
def obj_h1():
    return h1()


@pytest.fixture
def obj_h2():
    return h2()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
