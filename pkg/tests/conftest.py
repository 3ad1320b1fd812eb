import math

import numpy as np
import pytest

from conflab.models import ModelSpec, generate


@pytest.fixture(scope="session")
def flat08():
    return generate(ModelSpec("flat-disc", spacing=0.08))


@pytest.fixture(scope="session")
def flat04():
    return generate(ModelSpec("flat-disc", spacing=0.04))


@pytest.fixture(scope="session")
def hyp08():
    return generate(ModelSpec("hyperbolic-disc", radius=0.8, spacing=0.08))


@pytest.fixture(scope="session")
def tripod():
    return generate(ModelSpec("tree", legs=(1.0, 1.0, 1.0), spacing=0.1))


@pytest.fixture(scope="session")
def cone_pi():
    return generate(ModelSpec("cone", total_angle=math.pi, spacing=0.04))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from importlib import import_module

    try:
        lines = import_module("test_acceptance").LINES
    except ImportError:
        return
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
