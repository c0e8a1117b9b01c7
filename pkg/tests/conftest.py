import numpy as np
import pytest

from teugels_control import (JumpMeasure, LevyModel, build_basis,
                             simulate_ensemble)


@pytest.fixture(scope="session")
def benchmark_model():
    return LevyModel(b=-0.1, sigma2=0.25,
                     jumps=JumpMeasure.point_masses([(1.0, 0.3)]))


@pytest.fixture(scope="session")
def mixed_model():
    return LevyModel(b=0.0, sigma2=1.0,
                     jumps=JumpMeasure.two_sided_exponential(1.0, 0.5, 2.0, 3.0))


@pytest.fixture(scope="session")
def benchmark_basis(benchmark_model):
    return build_basis(benchmark_model, 2)


@pytest.fixture(scope="session")
def small_ensemble(benchmark_model, benchmark_basis):
    """4000 paths, 25 steps over [0, 1]: cheap enough for every solver test."""
    return simulate_ensemble(benchmark_model, benchmark_basis, 0.0, 1.0,
                             25, 4000, 99)
