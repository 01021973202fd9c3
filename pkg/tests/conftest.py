import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from bnsp_green import FluidParams, RunConfig

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@st.composite
def fluid_params(draw, equal_speeds: bool = False):
    mu1 = draw(st.floats(0.2, 3.0))
    mu2 = draw(st.floats(-0.6 * mu1, 2.0))
    mb1 = draw(st.floats(0.2, 3.0))
    mb2 = draw(st.floats(-0.6 * mb1, 2.0))
    rho = draw(st.floats(0.5, 5.0))
    c1 = draw(st.floats(0.3, 3.0))
    c2 = c1 if equal_speeds else draw(st.floats(0.3, 3.0))
    return FluidParams(mu1, mu2, mb1, mb2, rho, c1, c2)


def random_params(rng: np.random.Generator, equal_speeds: bool = False) -> FluidParams:
    mu1, mb1 = rng.uniform(0.2, 3.0, 2)
    mu2 = rng.uniform(-0.6 * mu1, 2.0)
    mb2 = rng.uniform(-0.6 * mb1, 2.0)
    rho = rng.uniform(0.5, 5.0)
    c1, c2 = rng.uniform(0.3, 3.0, 2)
    return FluidParams(mu1, mu2, mb1, mb2, rho, c1, c1 if equal_speeds else c2)


@pytest.fixture
def demo_params():
    """Equal sound speeds, distinct viscosities, strong plasma coupling."""
    return FluidParams(1.0, 0.0, 2.0, 0.0, 10.0, 1.0, 1.0)


@pytest.fixture
def demo_config():
    return RunConfig(eps1=1.5)


@pytest.fixture
def generic_params():
    return FluidParams(1.0, 0.0, 2.0, 0.0, 3.0, 1.0, 1.5)
