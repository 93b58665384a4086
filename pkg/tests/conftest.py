import sys

import numpy as np
import pytest

from linetemp.conductor import get_conductor
from linetemp.scenarios import benchmark_scenario


@pytest.fixture
def drake():
    return get_conductor("Drake")


@pytest.fixture
def bench():
    return benchmark_scenario()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines):
        terminalreporter.write_line(lines[key])

