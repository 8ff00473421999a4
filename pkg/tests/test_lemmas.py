"""Tests for the step-size sum inequalities and the operator-power bound."""

import numpy as np
import pytest

from core.exceptions import ValidationError
from core.learner import ConstantStep, Schedule
from theory import lemmas


class TestSums:
    """Tests for the left-hand sides of the sum inequalities."""

    def test_lemma7_small_t_by_hand(self):
        s = Schedule(0.5, 1.0)
        g2, g3 = 2**-0.5, 3**-0.5
        # j = 2: no head, tail gamma_3; j = 3: head gamma_2, no tail
        expected = g2 / (np.sqrt(2) * np.sqrt(1 + g3)) + g3 * (1 + np.sqrt(g2)) / np.sqrt(3)
        assert lemmas.lemma7_lhs(s, 3) == pytest.approx(expected)

    def test_lemma8_small_t_by_hand(self):
        s = Schedule(0.5, 1.0)
        g2, g3 = 2**-0.5, 3**-0.5
        expected = np.sqrt(g2**2 / (1 + g3) + g3**2 * (1 + g2))
        assert lemmas.lemma8_lhs(s, 3) == pytest.approx(expected)

    def test_constant_step_rule(self):
        rule = ConstantStep(0.1)
        assert lemmas.lemma7_lhs(rule, 10) > 0
        assert lemmas.lemma8_lhs(rule, 10, "square") >= lemmas.lemma8_lhs(rule, 10, "linear") - 1e-12

    def test_t_below_two(self, schedule):
        assert lemmas.lemma7_lhs(schedule, 1) == 0.0
        assert lemmas.lemma8_lhs(schedule, 1) == 0.0

    def test_unknown_variant(self, schedule):
        with pytest.raises(ValidationError):
            lemmas.lemma7_lhs(schedule, 5, "cubic")
        with pytest.raises(ValidationError):
            lemmas.lemma8_lhs(schedule, 5, "sqrt")


class TestLemmaChecks:
    """The inequalities hold on their documented range."""

    @pytest.mark.parametrize("theta", [0.55, 2.0 / 3.0, 0.75, 0.9])
    @pytest.mark.parametrize("mu", [1.0, 2.0])
    def test_sum_checks_pass(self, theta, mu):
        report = lemmas.lemma_sum_checks(theta, mu, 200)
        assert report.passed, report.violations
        assert report.n_cases > 2 * 197
        assert set(report.details["statement_variant_violations"]) == {
            "lemma7:linear",
            "lemma8:square",
        }

    def test_explicit_t_values(self):
        report = lemmas.lemma_sum_checks(0.75, 1.0, 50, t_values=[10, 20, 20])
        assert report.details["branch"] == "general"
        assert report.passed

    def test_two_thirds_branch(self):
        report = lemmas.lemma_sum_checks(2.0 / 3.0, 1.0, 20)
        assert report.details["branch"] == "two-thirds"

    def test_t_max_too_small(self):
        with pytest.raises(ValidationError):
            lemmas.lemma_sum_checks(0.75, 1.0, 3)

    def test_theta_out_of_range(self):
        with pytest.raises(ValidationError):
            lemmas.lemma_sum_checks(0.4, 1.0, 100)

    @pytest.mark.parametrize("theta", [0.3, 0.6, 0.9])
    def test_sandwich(self, theta):
        assert lemmas.lemma9_check(theta, 1.5, 500).passed


class TestOperatorProduct:
    """Tests for the operator-power product bound."""

    def test_product_norm_single_factor(self):
        eig = np.array([1.0, 0.25])
        # max(|1 - 0.5| * 1, |1 - 0.125| * 0.5)
        assert lemmas.product_norm(np.array([0.5]), eig, 0.5) == pytest.approx(0.5)
        assert lemmas.product_norm(np.array([0.5, 0.5]), eig, 0.5) == pytest.approx(0.3828125)

    def test_check_passes(self):
        report = lemmas.operator_product_norm_check(
            0.5, 0.75, 1.0, 8, 5, np.random.default_rng(0), windows=10, t_max=100
        )
        assert report.passed
        assert report.n_cases == 50
        assert report.details["spectral_vs_explicit_max_gap"] < 1e-10

    @pytest.mark.parametrize("dim,beta", [(0, 0.5), (51, 0.5), (5, 0.0)])
    def test_rejects(self, dim, beta):
        with pytest.raises(ValidationError):
            lemmas.operator_product_norm_check(
                beta, 0.75, 1.0, dim, 1, np.random.default_rng(0)
            )
