"""Tests for the one-step error decomposition on the support grid."""

import numpy as np
import pytest

from core.exceptions import ValidationError
from core.kernels import kappa
from core.learner import Schedule, run
from core.measure import pairwise_target
from theory import decomposition
from theory.spectral import build_spectral_model, regular_measure


@pytest.fixture
def model(induced_kernel, grid5):
    return build_spectral_model(induced_kernel, grid5)


@pytest.fixture
def trajectory(induced_kernel, grid5, schedule):
    return run(
        "opera-reduced", grid5, induced_kernel, 30, np.random.default_rng(11),
        schedule=schedule, record_at="all",
    )


@pytest.fixture
def frame(trajectory, model, grid5, schedule):
    return decomposition.decomposition_frame(trajectory, model, grid5, schedule)


class TestDecompositionFrame:
    """The recursion reproduces the learner exactly."""

    def test_shapes(self, frame):
        assert frame.T == 30
        assert len(frame.steps) == 29
        assert frame.f.shape == (30, 25)

    def test_first_iterate_is_zero(self, frame):
        np.testing.assert_allclose(frame.f[0], 0.0)

    def test_one_step_residuals(self, frame):
        assert frame.one_step_residuals().max() <= 1e-8

    def test_unrolled_residual(self, frame):
        assert frame.unrolled_residual() <= 1e-7

    def test_residual_helper(self, trajectory, model, grid5, schedule):
        assert decomposition.decomposition_residual(trajectory, model, grid5, schedule) <= 1e-7

    def test_omega_identity_on_last_step(self, frame):
        factors = frame.omega_factors(start_offset=1)
        np.testing.assert_allclose(factors[-1], 1.0)

    def test_empirical_operator_weights_sum_to_one(self, frame):
        for op in frame.steps:
            assert op.c_hat.sum() == pytest.approx(1.0)
            assert op.c_tilde.sum() == pytest.approx(1.0)


class TestInputChecks:
    def test_rejects_projected_runs(self, induced_kernel, grid5, model, schedule):
        traj = run(
            "pogd", grid5, induced_kernel, 10, np.random.default_rng(0),
            R=1.0, eta=0.1, record_at="all",
        )
        with pytest.raises(ValidationError):
            decomposition.decomposition_frame(traj, model, grid5, schedule)

    def test_requires_every_step(self, induced_kernel, grid5, model, schedule):
        traj = run("opera-reduced", grid5, induced_kernel, 10, np.random.default_rng(0), schedule=schedule)
        with pytest.raises(ValidationError):
            decomposition.decomposition_frame(traj, model, grid5, schedule)

    def test_rejects_other_support(self, trajectory, induced_kernel, skewed4, schedule, grid5):
        other = build_spectral_model(induced_kernel, skewed4)
        with pytest.raises(ValidationError):
            decomposition.decomposition_frame(trajectory, other, grid5, schedule)


class TestConditionalMean:
    """B^t has zero conditional mean given the history."""

    def test_exact_mean_vanishes(self, frame, trajectory, model, grid5):
        X, y = trajectory.samples
        for i in (0, 10, 28):
            t = frame.steps[i].t
            mean = decomposition.conditional_mean_exact(
                model, grid5, frame.f[i], (X[: t - 1], y[: t - 1])
            )
            assert np.max(np.abs(mean)) <= 1e-10 * (1.0 + np.max(np.abs(frame.b_term(i))))

    def test_monte_carlo_mean(self, frame, trajectory, model, grid5):
        X, y = trajectory.samples
        t = frame.steps[15].t
        result = decomposition.conditional_mean_monte_carlo(
            model, grid5, frame.f[15], (X[: t - 1], y[: t - 1]), np.random.default_rng(4)
        )
        assert result.stderr > 0
        assert result.passed

    def test_needs_history(self, model, grid5):
        with pytest.raises(ValidationError):
            decomposition.conditional_mean_exact(
                model, grid5, np.zeros(25), (np.empty((0, 1)), np.empty(0))
            )


class TestOperatorChecks:
    def test_hs_domination(self, frame):
        report = decomposition.hs_domination(frame)
        assert report.passed
        assert report.n_cases == 2 * len(frame.steps)

    def test_sample_error_report(self, frame, schedule, grid5):
        report = decomposition.sample_error_terms(frame, schedule, 1.5, grid5.M, 0.1)
        assert report.n_cases == 2
        assert set(report.details) == {"drift", "drift_bound", "martingale", "martingale_bound"}


class TestApproximationError:
    """||omega f~|| stays below the K-functional and source bounds."""

    def test_k_functional_bound(self, model, induced_kernel, grid5):
        kap = kappa(induced_kernel, grid5.support).value
        schedule = Schedule(2.0 / 3.0, kap**2)
        target = model.grid_function(pairwise_target(grid5))
        report = decomposition.approximation_error_check(
            model, target, schedule, kap, [2, 10, 100, 1000]
        )
        assert report.passed
        assert report.n_cases == 4

    def test_source_bound(self, model, induced_kernel, grid5):
        kap = kappa(induced_kernel, grid5.support).value
        schedule = Schedule(2.0 / 3.0, kap**2)
        _, target = regular_measure(model, 1.0, 2.0, np.random.default_rng(3))
        report = decomposition.approximation_error_check(
            model, target.values, schedule, kap, [5, 50, 500], 1.0, target.source_norm
        )
        assert report.passed
        assert report.n_cases == 6

    def test_rejects_small_t(self, model, schedule):
        with pytest.raises(ValidationError):
            decomposition.approximation_error_check(model, np.zeros(25), schedule, 1.0, [1])
