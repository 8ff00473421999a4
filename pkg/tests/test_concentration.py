"""Tests for the Monte Carlo concentration coverage checks."""

import math

import numpy as np
import pytest

from core.exceptions import ValidationError
from theory.concentration import (
    BENNETT_DISTRIBUTIONS,
    PINELIS_DISTRIBUTIONS,
    CoverageResult,
    bennett_bound,
    concentration_coverage,
    coverage_tolerance,
    pinelis_bound,
)


class TestBoundFormulas:
    def test_bennett(self):
        log_term = math.log(40.0)
        assert bennett_bound(1.0, 1.0, 100, 0.05) == pytest.approx(
            2.0 * log_term / 100 + math.sqrt(log_term / 100)
        )

    def test_pinelis(self):
        assert pinelis_bound(3.0, 2.0, 0.5) == pytest.approx(2.0 * 3.0 * math.log(4.0))

    def test_tolerance(self):
        assert coverage_tolerance(0.05, 10_000) == pytest.approx(0.05 + 3 * math.sqrt(0.0475 / 1e4))


class TestCoverage:
    """Empirical exceedance frequencies stay below delta plus slack."""

    @pytest.mark.parametrize("dist", BENNETT_DISTRIBUTIONS)
    def test_bennett_distributions(self, dist):
        result = concentration_coverage("bennett", dist, 50, 0.05, 2000, np.random.default_rng(1))
        assert result.passed
        assert result.report().passed

    @pytest.mark.parametrize("dist", PINELIS_DISTRIBUTIONS)
    def test_pinelis_distributions(self, dist):
        result = concentration_coverage("pinelis", dist, 50, 0.05, 2000, np.random.default_rng(2))
        assert result.passed

    def test_constant_never_exceeds(self):
        result = concentration_coverage("bennett", "constant", 10, 0.1, 100, np.random.default_rng(0))
        assert result.n_exceeded == 0
        assert result.frequency == 0.0

    def test_failed_result_is_reported(self):
        result = CoverageResult("bennett", "sphere", 10, 0.05, 100, 0.1, 50)
        assert not result.passed
        report = result.report()
        assert report.n_violations == 1
        assert report.details["frequency"] == 0.5

    @pytest.mark.parametrize(
        "kind,dist,t,delta",
        [
            ("hoeffding", "sphere", 10, 0.1),
            ("pinelis", "ball", 10, 0.1),
            ("bennett", "sphere", 0, 0.1),
            ("bennett", "sphere", 10, 1.5),
        ],
    )
    def test_invalid(self, kind, dist, t, delta):
        with pytest.raises(ValidationError):
            concentration_coverage(kind, dist, t, delta, 10, np.random.default_rng(0))
