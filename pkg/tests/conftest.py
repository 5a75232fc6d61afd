import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tspmp import registry
from tspmp.timescale import build_timescale

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def mixed_scale():
    """``[0, 1] ∪ {2}``: one dense segment followed by an isolated point."""
    return build_timescale([[0, 1], [2, 2]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def problem(name):
    return registry.get_problem(name)
