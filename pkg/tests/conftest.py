import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).parent.parent / "lanpower"))

from models import Family, Hypothesis, ModelSpec, PerturbationSpec, SeriesSample, simulate  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo checks with m >= 500 replicates")


@pytest.fixture
def unit_g():
    # G(1) = 2 / (1 + 1) = 1
    return PerturbationSpec(amplitude_a=1.0, coefficient=2.0)


@pytest.fixture
def two_point_sample():
    return SeriesSample(values=np.array([1.0, 2.0]))


@pytest.fixture
def ar1_spec():
    return ModelSpec(family=Family.AR1, rho0=0.1, g=PerturbationSpec(1.0, 5.0), n=400)


@pytest.fixture
def arch_spec():
    g = PerturbationSpec(1.0, 3.5)
    return ModelSpec(family=Family.ARCH, rho0=0.1, g=g, b=g, n=200)


@pytest.fixture
def ar1_sample(ar1_spec):
    return simulate(ar1_spec, 12345)


@pytest.fixture
def arch_sample(arch_spec):
    return simulate(arch_spec.with_hypothesis(Hypothesis.LOCAL_ALTERNATIVE), 2024)
