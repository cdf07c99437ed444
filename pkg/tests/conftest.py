import numpy as np
import pytest

from kernel_scaling_laws import ExplicitSpectrum, PowerLawModel, SolverConfig


@pytest.fixture
def small_model():
    return PowerLawModel(alpha=2.0, r=0.25, p_cut=200)


@pytest.fixture
def ridge_model():
    return PowerLawModel(alpha=2.0, r=0.5, p_cut=1000)


@pytest.fixture
def single_mode():
    return ExplicitSpectrum(eigenvalues=[1.0], teacher=[1.0])


@pytest.fixture
def fast_config():
    return SolverConfig(tol=1e-8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)
