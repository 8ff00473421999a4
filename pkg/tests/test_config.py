"""Tests for ExperimentConfig parsing and validation."""

import math

import numpy as np
import pytest

from core.config import ExperimentConfig, flatten
from core.exceptions import ConfigurationError
from core.measure import DiscreteMeasure, SamplerMeasure


class TestFromMapping:
    """Tests for flat and nested key/value input."""

    def test_defaults(self):
        cfg = ExperimentConfig.from_mapping({})
        assert cfg.kernel == "induced(gaussian:0.5)"
        assert cfg.run.modes == ["opera-reduced"]
        assert cfg.run.record_at == "final"
        assert cfg.schedule.mu == "auto"

    def test_flat_strings_are_converted(self):
        cfg = ExperimentConfig.from_mapping(
            {
                "theta": "0.75",
                "mu": "2",
                "T": "50, 100",
                "modes": "opera-direct,pogd",
                "n_trials": "3",
                "track_average": "yes",
                "gram_cache": "auto",
                "R": "inf",
                "eta": "0.1",
            }
        )
        assert cfg.schedule.theta == 0.75
        assert cfg.schedule.mu == 2.0
        assert cfg.run.T == [50, 100]
        assert cfg.run.modes == ["opera-direct", "pogd"]
        assert cfg.run.n_trials == 3
        assert cfg.run.track_average is True
        assert cfg.run.gram_cache is None
        assert math.isinf(cfg.run.R)

    def test_pogd_with_infinite_radius_needs_numeric_eta(self):
        with pytest.raises(ConfigurationError, match="eta"):
            ExperimentConfig.from_mapping({"R": "inf", "modes": "pogd"})
        cfg = ExperimentConfig.from_mapping({"R": "inf", "modes": "pogd", "eta": "0.05"})
        assert cfg.run.eta == 0.05

    def test_nested_sections(self):
        cfg = ExperimentConfig.from_mapping(
            {"schedule": {"theta": 0.6}, "run": {"seed": 9}, "output": {"name": "x"}}
        )
        assert cfg.schedule.theta == 0.6
        assert cfg.run.seed == 9
        assert cfg.output.name == "x"

    def test_dashes_in_keys(self):
        assert flatten({"n-trials": 4}) == {"n_trials": 4}
        assert ExperimentConfig.from_mapping({"n-trials": 4}).run.n_trials == 4

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError, match="Unknown configuration key: colour"):
            ExperimentConfig.from_mapping({"colour": "blue"})

    @pytest.mark.parametrize(
        "key,value",
        [("m", "2.5"), ("theta", "high"), ("track_average", "maybe"), ("mu", "paper")],
    )
    def test_bad_values_name_the_key(self, key, value):
        with pytest.raises(ConfigurationError, match=key):
            ExperimentConfig.from_mapping({key: value})

    def test_spectral_f_rho_form(self):
        """f_rho=spectral:beta=B:seed=S selects a constructed target with its own seed."""
        cfg = ExperimentConfig.from_mapping({"f_rho": "spectral:beta=0.5:seed=3"})
        assert cfg.beta == 0.5
        assert cfg.target_seed == 3
        assert cfg.measure.f_rho is None
        assert ExperimentConfig.from_mapping({"f_rho": "spectral:beta=1"}).target_seed is None

    def test_expr_f_rho_form(self):
        """f_rho=expr:<name> selects a catalog target on a box."""
        cfg = ExperimentConfig.from_mapping({"f_rho": "expr:poly2"})
        assert cfg.measure.kind == "box"
        assert cfg.measure.target == "poly2"
        assert isinstance(cfg.build_measure(), SamplerMeasure)

    @pytest.mark.parametrize(
        "mapping",
        [
            {"f_rho": "expr:nope"},
            {"f_rho": "expr:"},
            {"f_rho": "expr:poly2", "kind": "grid"},
            {"f_rho": "spectral:seed=3"},
            {"f_rho": "spectral:beta=0.5:gamma=1"},
            {"f_rho": "spectral:beta=0.5", "beta": 1.0},
            {"f_rho": "spectral:beta=0.5:seed=-1"},
        ],
    )
    def test_bad_f_rho_forms(self, mapping):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_mapping(mapping)

    def test_matching_explicit_keys_are_accepted(self):
        cfg = ExperimentConfig.from_mapping({"f_rho": "spectral:beta=1", "beta": "1.0"})
        assert cfg.beta == 1.0

    def test_noise_half_width_alias(self):
        cfg = ExperimentConfig.from_mapping({"measure": {"noise_half_width": 0.2}})
        assert cfg.measure.noise == 0.2

    def test_record_at(self):
        assert ExperimentConfig.from_mapping({"record_at": "log2"}).run.record_at == "log2"
        cfg = ExperimentConfig.from_mapping({"record_at": "2,10,50", "T": "100"})
        assert cfg.run.record_at == [2, 10, 50]


class TestValidate:
    """Cross-field validation."""

    @pytest.mark.parametrize(
        "mapping",
        [
            {"delta": 1.0},
            {"beta": -0.5},
            {"norm_target": 0},
            {"theta": 1.0},
            {"mu": -1},
            {"T": "1"},
            {"n_trials": 0},
            {"workers": 0},
            {"modes": "sgd"},
            {"R": 0},
            {"eta": -0.1},
            {"kind": "sphere"},
            {"kind": "box", "target": "nope"},
            {"kind": "box", "beta": 1.0},
            {"kernel": "gaussian:0.5"},
            {"kernel": "pair-gaussian:1", "modes": "opera-reduced"},
            {"record_at": "200", "T": "100"},
            {"kind": "discrete"},
            {"kind": "grid", "dim": 2},
        ],
    )
    def test_rejects(self, mapping):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_mapping(mapping)

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError, match="dim"):
            ExperimentConfig.from_mapping(
                {"kind": "discrete", "support": "0,0;1,1", "f_rho": "0,1", "dim": 1}
            )

    def test_pair_kernel_with_direct_mode(self):
        cfg = ExperimentConfig.from_mapping(
            {"kernel": "pair-gaussian:1", "modes": "opera-direct"}
        )
        assert not cfg.build_kernel().is_induced


class TestHorizonCap:
    """Configured horizons are capped by max_T."""

    def test_default_cap(self):
        assert ExperimentConfig.from_mapping({"T": "3000"}).run.max_T == 3000
        with pytest.raises(ConfigurationError, match="max_T"):
            ExperimentConfig.from_mapping({"T": "100,3001"})

    def test_raised_cap(self):
        cfg = ExperimentConfig.from_mapping({"T": "5000", "max_T": "6000"})
        assert cfg.run.T == [5000]

    def test_invalid_cap(self):
        with pytest.raises(ConfigurationError, match="max_T"):
            ExperimentConfig.from_mapping({"T": "2", "max_T": "1"})

    def test_cap_is_not_in_digest(self):
        a = ExperimentConfig.from_mapping({})
        b = ExperimentConfig.from_mapping({"max_T": 10_000})
        assert a.digest() == b.digest()


class TestBuilders:
    """Tests for measure, kernel and schedule construction."""

    def test_grid_measure(self):
        cfg = ExperimentConfig.from_mapping({"m": 5, "noise": 0.1})
        meas = cfg.build_measure()
        assert isinstance(meas, DiscreteMeasure)
        assert meas.m == 5
        np.testing.assert_allclose(meas.f_rho_values, np.sin(np.pi * np.linspace(-1, 1, 5)))
        assert meas.M == pytest.approx(1.1)

    def test_discrete_measure(self):
        cfg = ExperimentConfig.from_mapping(
            {
                "kind": "discrete",
                "dim": 2,
                "support": "0,0;1,0;0,1",
                "probs": "0.5,0.25,0.25",
                "f_rho": "0,1,2",
            }
        )
        meas = cfg.build_measure()
        assert isinstance(meas, DiscreteMeasure)
        assert meas.support.shape == (3, 2)

    def test_box_measure(self):
        cfg = ExperimentConfig.from_mapping({"kind": "box", "dim": 2, "target": "poly2"})
        assert isinstance(cfg.build_measure(), SamplerMeasure)

    def test_auto_mu_is_kappa_squared(self):
        cfg = ExperimentConfig.from_mapping({})
        meas = cfg.build_measure()
        kap = cfg.kappa_value(meas)
        assert cfg.build_schedule(kap).mu == pytest.approx(kap**2)

    def test_explicit_mu(self):
        cfg = ExperimentConfig.from_mapping({"mu": 3})
        assert cfg.build_schedule(1.0).mu == 3.0


class TestDigest:
    """The digest covers every setting that changes emitted numbers."""

    def test_stable(self):
        a = ExperimentConfig.from_mapping({"theta": 0.75})
        b = ExperimentConfig.from_mapping({"schedule": {"theta": 0.75}})
        assert a.digest() == b.digest()
        assert len(a.digest()) == 16

    def test_changes_with_theta(self):
        a = ExperimentConfig.from_mapping({"theta": 0.75})
        b = ExperimentConfig.from_mapping({"theta": 0.8})
        assert a.digest() != b.digest()

    def test_ignores_output_and_workers(self):
        a = ExperimentConfig.from_mapping({})
        b = ExperimentConfig.from_mapping({"output_dir": "/elsewhere", "name": "b", "workers": 8})
        assert a.digest() == b.digest()

    def test_to_dict_round_trip(self):
        cfg = ExperimentConfig.from_mapping({"theta": 0.7, "T": "30,60", "beta": 0.5})
        again = ExperimentConfig.from_mapping(cfg.to_dict())
        assert again.digest() == cfg.digest()
