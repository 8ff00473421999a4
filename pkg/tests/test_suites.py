"""Tests for the named verification suites at small sizes."""

import pytest

from core.exceptions import ConfigurationError
from theory.suites import SUITES, SuiteOptions, grid_measure, run_suite

SMALL_OPTIONS = {
    "lemmas": SuiteOptions(theta=0.75, mu=1.0, t_max=60),
    "operators": SuiteOptions(beta=0.5, dim=5, trials=3),
    "concentration": SuiteOptions(T=20, trials=500, seed=3),
    "decomposition": SuiteOptions(m=4, T=20, trials=1),
    "isometry": SuiteOptions(trials=10),
    "equivalence": SuiteOptions(m=4, T=40, trials=1),
    "norm-bound": SuiteOptions(theta=0.75, m=4, T=50, trials=2),
    "projection": SuiteOptions(m=4, T=30, trials=1),
    "approximation": SuiteOptions(m=4, T=200, beta=1.0),
}


class TestRunSuite:
    """Every suite passes on small problems."""

    def test_every_suite_has_small_options(self):
        assert set(SMALL_OPTIONS) == set(SUITES)

    @pytest.mark.parametrize("name", sorted(SMALL_OPTIONS))
    def test_suite_passes(self, name):
        report = run_suite(name, SMALL_OPTIONS[name])
        assert report.n_cases > 0
        assert report.passed, report.violations
        assert report.parameters["suite"] == name
        assert report.as_dict()["n_violations"] == 0

    def test_unknown_suite(self):
        with pytest.raises(ConfigurationError, match="Available"):
            run_suite("everything")

    def test_threaded_workers(self):
        threaded = run_suite("norm-bound", SuiteOptions(theta=0.75, m=4, T=30, trials=2, workers=2))
        assert threaded.passed
        assert len(threaded.details["reports"]) == 2

    def test_lemmas_lists_statement_forms(self):
        report = run_suite("lemmas", SuiteOptions(theta=0.6, mu=2.0, t_max=30))
        assert "theta=0.6,mu=2" in report.details["statement_variant_violations"]
        assert len(report.details["reports"]) == 1

    def test_equivalence_reports_deviation(self):
        report = run_suite("equivalence", SuiteOptions(m=4, T=20, trials=2))
        assert report.details["max_deviation"] < 1e-8


class TestGridMeasure:
    def test_layout(self):
        meas = grid_measure(4, noise=0.0)
        assert meas.m == 4
        assert meas.probs.sum() == pytest.approx(1.0)
        assert meas.M == pytest.approx(abs(meas.f_rho_values).max())


@pytest.mark.slow
class TestSuitesAtDefaultSize:
    @pytest.mark.parametrize("name", ["lemmas", "isometry", "equivalence"])
    def test_defaults(self, name):
        assert run_suite(name, SuiteOptions(t_max=2000)).passed
