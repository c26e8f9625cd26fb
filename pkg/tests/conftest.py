import dataclasses

import numpy as np
import pytest

from savcast.io import load_scenario
from savcast.simulate import build_runtime, initial_state


@pytest.fixture(scope="session")
def scenario():
    return load_scenario()


@pytest.fixture(scope="session")
def runtime(scenario):
    return build_runtime(scenario)


@pytest.fixture(scope="session")
def base_state(runtime):
    return initial_state(runtime)


@pytest.fixture(scope="session")
def short_runtime(scenario):
    """Five-year variant for optimizer tests."""
    short = dataclasses.replace(scenario, horizon_years=5)
    return build_runtime(short)


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
