"""Pytest configuration and shared fixtures."""

import tempfile

import numpy as np
import pytest

from core.kernels import PairwiseKernel, UnivariateKernel, parse_kernel_spec
from core.learner import Schedule
from core.measure import DiscreteMeasure, UniformNoise


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield tmpdir


@pytest.fixture
def rng():
    """Seeded generator."""
    return np.random.default_rng(12345)


@pytest.fixture
def gaussian_base() -> UnivariateKernel:
    return UnivariateKernel("gaussian", 1, sigma=0.5)


@pytest.fixture
def induced_kernel() -> PairwiseKernel:
    """Induced kernel over the gaussian base used throughout the tests."""
    kernel = parse_kernel_spec("induced(gaussian:0.5)")
    assert isinstance(kernel, PairwiseKernel)
    return kernel


@pytest.fixture
def pair_gaussian_kernel() -> PairwiseKernel:
    kernel = parse_kernel_spec("pair-gaussian:1.0")
    assert isinstance(kernel, PairwiseKernel)
    return kernel


@pytest.fixture
def grid5() -> DiscreteMeasure:
    """Five equally weighted points on [-1, 1] with f_rho = sin(pi x)."""
    support = np.linspace(-1.0, 1.0, 5).reshape(-1, 1)
    return DiscreteMeasure(
        support, np.full(5, 0.2), np.sin(np.pi * support[:, 0]), UniformNoise(0.1)
    )


@pytest.fixture
def skewed4() -> DiscreteMeasure:
    """Four points with unequal weights and no label noise."""
    support = np.array([[-0.9], [-0.2], [0.3], [0.8]])
    return DiscreteMeasure(
        support, np.array([0.1, 0.2, 0.3, 0.4]), np.array([0.5, -0.3, 0.2, 0.9])
    )


@pytest.fixture
def schedule() -> Schedule:
    return Schedule(theta=2.0 / 3.0, mu=1.0)


@pytest.fixture
def flat_config_text() -> str:
    """A small flat-format experiment config."""
    return (
        "# small discrete run\n"
        "kernel = induced(gaussian:0.5)\n"
        "kind = grid\n"
        "m = 5\n"
        "theta = 0.6666666666666666\n"
        "T = 20\n"
        "n_trials = 2\n"
        "seed = 7\n"
        "workers = 1\n"
    )
