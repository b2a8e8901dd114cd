"""
Shared parameter sets for the test suite.
"""

import pytest

from src.environment.env_model import SystemSpec, composite_env
from src.processing.heatflux import TwoEnvSpec


@pytest.fixture
def system():
    return SystemSpec(omega0=1.0)


@pytest.fixture
def plateau_env():
    """Strong time-scale separation: prethermal plateau at beta_I = 1."""
    return composite_env(g_I=1e-2, g_II=1e-5, beta_I=1.0, beta_II=0.1)


@pytest.fixture
def control_env():
    """Same temperatures, RII as strong as RI: no plateau."""
    return composite_env(g_I=1e-2, g_II=1e-2, beta_I=1.0, beta_II=0.1)


@pytest.fixture
def components_env():
    """Equal couplings, used for the short/long time rate split."""
    return composite_env(g_I=1e-2, g_II=1e-2, beta_I=0.1, beta_II=0.2)


@pytest.fixture
def equilibrium_flux(system):
    return TwoEnvSpec(
        left=composite_env(g_I=1e-2, g_II=0.0, beta_I=1.0, beta_II=1.0),
        right=composite_env(g_I=1e-2, g_II=0.0, beta_I=0.1, beta_II=0.1),
        sys=system,
    )


@pytest.fixture
def single_reversal(system):
    return TwoEnvSpec(
        left=composite_env(g_I=1e-2, g_II=1e-3, beta_I=1.0, beta_II=0.1),
        right=composite_env(g_I=1e-2, g_II=1e-3, beta_I=0.1, beta_II=1.0),
        sys=system,
    )


@pytest.fixture
def double_reversal(system):
    return TwoEnvSpec(
        left=composite_env(g_I=1e-2, g_II=1e-5, beta_I=0.5, beta_II=10.0),
        right=composite_env(g_I=1e-2, g_II=1e-2, beta_I=0.1, beta_II=1.0),
        sys=system,
    )
