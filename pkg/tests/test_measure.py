"""Tests for sampling distributions and rho-norms."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.exceptions import ValidationError
from core.hypothesis import Expansion, lift
from core.kernels import Box
from core.measure import (
    DiscreteMeasure,
    SamplerMeasure,
    UniformNoise,
    pairwise_target,
    rho_norm,
    risk,
    sample_many,
)


class TestDiscreteMeasure:
    """Tests for finite-support measures."""

    def test_probs_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            DiscreteMeasure([[0.0], [1.0]], [0.5, 0.6], [0.0, 1.0])

    def test_probs_must_be_positive(self):
        with pytest.raises(ValidationError):
            DiscreteMeasure([[0.0], [1.0]], [1.0, 0.0], [0.0, 1.0])

    def test_repeated_support_point(self):
        with pytest.raises(ValidationError):
            DiscreteMeasure([[0.0], [0.0]], [0.5, 0.5], [0.0, 1.0])

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5], [0.0])

    def test_M_includes_noise(self, grid5):
        assert grid5.M == pytest.approx(1.0 + 0.1)

    def test_index_of(self, grid5):
        assert grid5.index_of(np.array([[0.5], [-1.0]])).tolist() == [3, 0]
        with pytest.raises(ValidationError):
            grid5.index_of(np.array([[0.25]]))

    def test_grid_pairs_layout(self, skewed4):
        pairs = skewed4.grid_pairs()
        m = skewed4.m
        a, b = 2, 1
        assert_allclose(pairs[a * m + b], [skewed4.support[a], skewed4.support[b]])
        assert skewed4.grid_weights()[a * m + b] == pytest.approx(0.3 * 0.2)

    def test_samples_stay_on_support(self, grid5, rng):
        x, y = sample_many(grid5, rng, 500)
        idx = grid5.index_of(x)
        assert np.all(np.abs(y - grid5.f_rho_values[idx]) <= 0.1)

    def test_sampling_frequencies(self, skewed4, rng):
        x, _ = sample_many(skewed4, rng, 20000)
        freq = np.bincount(skewed4.index_of(x), minlength=4) / 20000
        assert_allclose(freq, skewed4.probs, atol=0.02)


class TestSamplerMeasure:
    def test_unknown_target(self):
        with pytest.raises(ValidationError):
            SamplerMeasure(Box((0.0,), (1.0,)), "nope")

    def test_sin_sum_bound(self):
        meas = SamplerMeasure(Box((-1.0, -1.0), (1.0, 1.0)), "sin-sum", UniformNoise(0.2))
        assert meas.M == pytest.approx(2.2)

    def test_samples_in_box(self, rng):
        meas = SamplerMeasure(Box((0.0, 2.0), (1.0, 3.0)), "poly2")
        x, y = sample_many(meas, rng, 200)
        assert x.shape == (200, 2)
        assert np.all((x[:, 0] >= 0) & (x[:, 0] <= 1) & (x[:, 1] >= 2) & (x[:, 1] <= 3))
        assert_allclose(y, np.sum(x**2, axis=1))


class TestRhoNorm:
    """Exact and Monte Carlo rho-norms."""

    def test_discrete_exact(self, skewed4):
        target = pairwise_target(skewed4)
        f = skewed4.f_rho_values
        expected = np.sqrt(
            sum(
                skewed4.probs[a] * skewed4.probs[b] * (f[a] - f[b]) ** 2
                for a in range(4)
                for b in range(4)
            )
        )
        estimate = rho_norm(target, skewed4)
        assert estimate.value == pytest.approx(expected)
        assert estimate.stderr is None

    def test_zero_hypothesis_error_is_target_norm(self, grid5, gaussian_base):
        zero = lift(Expansion.empty(gaussian_base))
        target = pairwise_target(grid5)

        class Residual:
            def evaluate_pairs(self, pairs):
                return zero.evaluate_pairs(pairs) - target.evaluate_pairs(pairs)

        assert rho_norm(Residual(), grid5).value == pytest.approx(
            rho_norm(target, grid5).value
        )

    def test_monte_carlo_reports_stderr(self, rng):
        meas = SamplerMeasure(Box((-1.0,), (1.0,)), "poly2")
        estimate = rho_norm(pairwise_target(meas), meas, rng, 20000)
        # E (x^2 - x'^2)^2 = 2 (E x^4 - (E x^2)^2) = 2 (1/5 - 1/9)
        assert estimate.stderr is not None and estimate.stderr > 0
        assert estimate.value == pytest.approx(np.sqrt(2 * (1 / 5 - 1 / 9)), abs=5 * estimate.stderr + 1e-3)

    def test_risk_adds_noise_variance(self, grid5, gaussian_base):
        zero = lift(Expansion.empty(gaussian_base))
        excess = rho_norm(pairwise_target(grid5), grid5).value ** 2
        assert risk(zero, grid5).value == pytest.approx(excess + 2 * 0.1**2 / 3)
