import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from covdet import DirectRho, ExperimentPlan, ProjectionSpec, ScenarioConfig

settings.register_profile(
    "covdet",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("covdet")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def reference_scenario():
    """L=50 field with rho=0.8 and -1.7609 dB SNR."""
    return ScenarioConfig(
        num_sensors=50,
        correlation=DirectRho(0.8),
        sigma_s2=1.0,
        sigma_v2=0.5,
        sigma_w2=1.0,
    )


@pytest.fixture
def small_plan():
    """A fast plan for engine-level tests: L=12, M=5, T=4."""
    scenario = ScenarioConfig(
        num_sensors=12,
        correlation=DirectRho(0.8),
        sigma_s2=1.0,
        sigma_v2=0.5,
        sigma_w2=1.0,
    )
    return ExperimentPlan(
        scenario=scenario,
        projection=ProjectionSpec("orthonormal", 5),
        num_snapshots=4,
        trials=200,
        seed=77,
        alpha0=0.1,
    )
