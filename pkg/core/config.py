"""Experiment configuration for the OPERA toolkit.

``ExperimentConfig`` groups its settings into typed sub-configs:

  ``measure``  – the sampling distribution (grid, explicit discrete support or a box)
  ``schedule`` – the step-size schedule ``gamma_t = t**(-theta) / mu``
  ``run``      – modes, horizons, trial count, seeds, recording and POGD settings
  ``output``   – output directory and file slug

Config files and CLI overrides use flat keys (``theta = 0.75``); the owning
sub-config of each key is derived by dataclass introspection, so adding a field
to a sub-config makes it configurable without touching the parser. YAML/JSON
files may also nest keys under the sub-config name.

Configuration precedence (highest → lowest):
  1. CLI overrides (``--key=value``)
  2. Environment variables (OPERA_SEED, OPERA_OUTPUT_DIR)
  3. Config file
  4. Dataclass defaults below
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from core import constants
from core.exceptions import ConfigurationError, OperaToolkitError
from core.kernels import Box, PairwiseKernel, kappa, parse_kernel_spec
from core.learner import MODES, Schedule, resolve_record_at
from core.measure import TARGET_CATALOG, DiscreteMeasure, Measure, SamplerMeasure, UniformNoise

_logger = logging.getLogger(__name__)

MEASURE_KINDS = ("grid", "discrete", "box")


@dataclass
class MeasureConfig:
    """Sampling distribution of ``(x, y)``."""

    kind: str = "grid"
    m: int = 8
    dim: int = 1
    lo: float = -1.0
    hi: float = 1.0
    support: list[list[float]] | None = None
    probs: list[float] | None = None
    f_rho: list[float] | None = None
    target: str = "sin-sum"
    noise: float = 0.05
    mc_pairs: int = constants.MC_PAIRS


@dataclass
class ScheduleConfig:
    """``theta`` in (0, 1); ``mu`` as a number or ``auto`` for ``kappa**2``."""

    theta: float = 2.0 / 3.0
    mu: float | str = "auto"


@dataclass
class RunConfig:
    modes: list[str] = field(default_factory=lambda: ["opera-reduced"])
    T: list[int] = field(default_factory=lambda: [100])
    n_trials: int = 1
    seed: int = 0
    record_at: str | list[int] = "final"
    R: float = 1.0
    eta: float | str = "auto"
    workers: int = 1
    gram_cache: bool | None = None
    track_average: bool = False
    max_T: int = constants.MAX_HORIZON


@dataclass
class OutputConfig:
    output_dir: str = constants.OUTPUT_DIR
    name: str = "opera"


_SECTIONS = {
    "measure": MeasureConfig,
    "schedule": ScheduleConfig,
    "run": RunConfig,
    "output": OutputConfig,
}
_TOP_LEVEL = ("kernel", "delta", "beta", "norm_target", "target_seed")

_ALIASES = {"noise_half_width": "noise"}


def _build_field_to_section() -> dict[str, str]:
    mapping: dict[str, str] = {}
    for section, cls in _SECTIONS.items():
        for f in dataclasses.fields(cls):
            mapping[f.name] = section
    return mapping


_FIELD_TO_SECTION = _build_field_to_section()

# settings that do not change any emitted number
_DIGEST_EXCLUDED = ("output_dir", "name", "workers", "max_T")


def _split_list(value: Any) -> list[Any]:
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def _to_bool(key: str, value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"{key}: expected a boolean, got {value!r}")


def _to_float(key: str, value: Any) -> float:
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{key}: expected a number, got {value!r}") from exc


def _to_int(key: str, value: Any) -> int:
    try:
        number = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{key}: expected an integer, got {value!r}") from exc
    if not number.is_integer():
        raise ConfigurationError(f"{key}: expected an integer, got {value!r}")
    return int(number)


def _to_points(key: str, value: Any) -> list[list[float]]:
    """Points as nested lists, a flat list of scalars, or text (rows split by ';')."""
    if isinstance(value, str):
        rows: list[Any] = [r for r in value.split(";") if r.strip()]
        if len(rows) == 1:
            rows = _split_list(rows[0])
            return [[_to_float(key, v)] for v in rows]
        return [[_to_float(key, v) for v in _split_list(r)] for r in rows]
    points = []
    for row in _split_list(value):
        if isinstance(row, (list, tuple)):
            points.append([_to_float(key, v) for v in row])
        else:
            points.append([_to_float(key, row)])
    return points


def _convert(key: str, value: Any) -> Any:
    """Coerce a raw (possibly string) value to the type of *key*."""
    if value is None:
        return None
    if key in ("m", "dim", "mc_pairs", "n_trials", "seed", "workers", "max_T", "target_seed"):
        return _to_int(key, value)
    if key in ("lo", "hi", "noise", "theta", "R", "delta", "beta", "norm_target"):
        return _to_float(key, value)
    if key in ("mu", "eta"):
        if isinstance(value, str) and value.strip().lower() in ("auto", "paper"):
            if key == "mu" and value.strip().lower() == "paper":
                raise ConfigurationError("mu: expected a number or 'auto'")
            return value.strip().lower()
        return _to_float(key, value)
    if key == "T":
        return [_to_int(key, v) for v in _split_list(value)]
    if key == "modes":
        return [str(v).strip() for v in _split_list(value)]
    if key in ("probs", "f_rho"):
        return [_to_float(key, v) for v in _split_list(value)]
    if key == "support":
        return _to_points(key, value)
    if key == "record_at":
        if isinstance(value, str) and value.strip() in ("final", "all", "log2"):
            return value.strip()
        return [_to_int(key, v) for v in _split_list(value)]
    if key in ("gram_cache",):
        if isinstance(value, str) and value.strip().lower() == "auto":
            return None
        return _to_bool(key, value)
    if key == "track_average":
        return _to_bool(key, value)
    return str(value).strip()


def _normalise_key(raw_key: Any) -> str:
    key = str(raw_key).strip().replace("-", "_")
    return _ALIASES.get(key, key)


def _f_rho_form(value: str) -> dict[str, Any]:
    """Expand ``spectral:beta=B:seed=S`` or ``expr:<name>`` into plain config keys."""
    head, _, rest = value.strip().partition(":")
    if head == "expr":
        if not rest:
            raise ConfigurationError("f_rho: expr form needs a target name, e.g. expr:sin-sum")
        return {"kind": "box", "target": rest.strip()}
    expanded: dict[str, Any] = {}
    for part in filter(None, rest.split(":")):
        name, sep, raw = part.partition("=")
        name = name.strip()
        if not sep or name not in ("beta", "seed"):
            raise ConfigurationError(f"f_rho: expected spectral:beta=B[:seed=S], got {value!r}")
        expanded["beta" if name == "beta" else "target_seed"] = raw.strip()
    if "beta" not in expanded:
        raise ConfigurationError(f"f_rho: spectral form needs beta=B, got {value!r}")
    return expanded


def flatten(mapping: Mapping[str, Any]) -> dict[str, Any]:
    """Flatten one level of section nesting and normalise key spelling."""
    flat: dict[str, Any] = {}
    for raw_key, value in mapping.items():
        key = _normalise_key(raw_key)
        if key in _SECTIONS and isinstance(value, Mapping):
            for inner_key, inner in value.items():
                flat[_normalise_key(inner_key)] = inner
        else:
            flat[key] = value
    return flat


@dataclass
class ExperimentConfig:
    kernel: str = "induced(gaussian:0.5)"
    delta: float = 0.1
    beta: float | None = None
    norm_target: float = 2.0
    target_seed: int | None = None
    measure: MeasureConfig = field(default_factory=MeasureConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    run: RunConfig = field(default_factory=RunConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> ExperimentConfig:
        """Build and validate a config from flat (or section-nested) key/values.

        Raises:
            ConfigurationError: For unknown keys or values that fail to parse or
                validate; the message names the offending key.
        """
        cfg = cls()
        flat = flatten(mapping)
        raw_f_rho = flat.get("f_rho")
        if isinstance(raw_f_rho, str) and raw_f_rho.strip().startswith(("spectral:", "expr:")):
            del flat["f_rho"]
            expanded = _f_rho_form(raw_f_rho)
            _logger.debug("f_rho=%s expands to %s", raw_f_rho, expanded)
            for key, value in expanded.items():
                if key in flat and _convert(key, flat[key]) != _convert(key, value):
                    raise ConfigurationError(
                        f"f_rho: {raw_f_rho!r} conflicts with {key}={flat[key]!r}"
                    )
                flat[key] = value
        for key, value in flat.items():
            if key in _TOP_LEVEL:
                setattr(cfg, key, _convert(key, value))
            elif key in _FIELD_TO_SECTION:
                setattr(getattr(cfg, _FIELD_TO_SECTION[key]), key, _convert(key, value))
            else:
                raise ConfigurationError(f"Unknown configuration key: {key}")
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not 0.0 < self.delta < 1.0:
            raise ConfigurationError(f"delta: must lie in (0, 1), got {self.delta}")
        if self.beta is not None and not self.beta > 0:
            raise ConfigurationError(f"beta: must be positive, got {self.beta}")
        if self.target_seed is not None and self.target_seed < 0:
            raise ConfigurationError(f"target_seed: must be non-negative, got {self.target_seed}")
        if not self.norm_target > 0:
            raise ConfigurationError("norm_target: must be positive")
        if not 0.0 < self.schedule.theta < 1.0:
            raise ConfigurationError(f"theta: must lie in (0, 1), got {self.schedule.theta}")
        if isinstance(self.schedule.mu, float) and not self.schedule.mu > 0:
            raise ConfigurationError("mu: must be positive")
        run = self.run
        if not run.T or any(T < 2 for T in run.T):
            raise ConfigurationError(f"T: every horizon must be at least 2, got {run.T}")
        if run.max_T < 2:
            raise ConfigurationError(f"max_T: must be at least 2, got {run.max_T}")
        if max(run.T) > run.max_T:
            raise ConfigurationError(
                f"T: horizon {max(run.T)} exceeds max_T={run.max_T}; raise max_T to run it"
            )
        if run.n_trials < 1:
            raise ConfigurationError("n_trials: must be at least 1")
        if run.workers < 1:
            raise ConfigurationError("workers: must be at least 1")
        unknown = [m for m in run.modes if m not in MODES]
        if unknown or not run.modes:
            raise ConfigurationError(
                f"modes: unknown mode(s) {unknown}; available: {', '.join(MODES)}"
            )
        if not run.R > 0:
            raise ConfigurationError("R: must be positive (use inf for no projection)")
        if isinstance(run.eta, float) and not run.eta > 0:
            raise ConfigurationError("eta: must be positive, 'auto' or 'paper'")
        if self.measure.kind not in MEASURE_KINDS:
            raise ConfigurationError(
                f"kind: unknown measure kind {self.measure.kind!r}; "
                f"available: {', '.join(MEASURE_KINDS)}"
            )
        if self.measure.kind == "box" and self.measure.target not in TARGET_CATALOG:
            raise ConfigurationError(
                f"target: unknown target {self.measure.target!r}; "
                f"available: {', '.join(TARGET_CATALOG)}"
            )
        if self.beta is not None and self.measure.kind == "box":
            raise ConfigurationError("beta: spectral targets need a discrete measure")
        try:
            k = self.build_kernel()
            meas = self.build_measure()
        except OperaToolkitError as exc:
            raise ConfigurationError(str(exc)) from exc
        if meas.dim != k.domain_dim:
            raise ConfigurationError(
                f"dim: measure points have dimension {meas.dim}, kernel expects {k.domain_dim}"
            )
        if "opera-reduced" in run.modes and not k.is_induced:
            raise ConfigurationError(
                f"modes: opera-reduced needs an induced kernel, got {self.kernel!r}"
            )
        if run.eta in ("auto", "paper") and np.isinf(run.R) and "pogd" in run.modes:
            raise ConfigurationError("eta: give a number when R is infinite")
        try:
            resolve_record_at(run.record_at, max(run.T))
        except OperaToolkitError as exc:
            raise ConfigurationError(f"record_at: {exc}") from exc

    def build_kernel(self) -> PairwiseKernel:
        k = parse_kernel_spec(self.kernel, self.measure.dim)
        if not isinstance(k, PairwiseKernel):
            raise ConfigurationError(
                f"kernel: {self.kernel!r} is univariate; use induced(...) or pair-*"
            )
        return k

    def build_measure(self) -> Measure:
        mc = self.measure
        noise = UniformNoise(mc.noise)
        if mc.kind == "box":
            box = Box(np.full(mc.dim, mc.lo), np.full(mc.dim, mc.hi))
            return SamplerMeasure(box, mc.target, noise)
        if mc.kind == "grid":
            if mc.dim != 1:
                raise ConfigurationError("kind=grid is one-dimensional; use kind=discrete")
            support = np.linspace(mc.lo, mc.hi, mc.m).reshape(-1, 1)
            probs = np.full(mc.m, 1.0 / mc.m) if mc.probs is None else np.asarray(mc.probs)
            values = np.sin(np.pi * support[:, 0]) if mc.f_rho is None else np.asarray(mc.f_rho)
            return DiscreteMeasure(support, probs, values, noise)
        if mc.support is None or mc.f_rho is None:
            raise ConfigurationError("kind=discrete needs support and f_rho")
        support = np.asarray(mc.support, dtype=float)
        probs = (
            np.full(len(support), 1.0 / len(support)) if mc.probs is None else np.asarray(mc.probs)
        )
        return DiscreteMeasure(support, probs, np.asarray(mc.f_rho), noise)

    def kappa_value(self, meas: Measure) -> float:
        k = self.build_kernel()
        domain = meas.support if isinstance(meas, DiscreteMeasure) else meas.box
        return kappa(k, domain).value

    def build_schedule(self, kap: float) -> Schedule:
        mu = kap**2 if self.schedule.mu == "auto" else float(self.schedule.mu)
        if not mu > 0:
            raise ConfigurationError("mu: kappa is zero on this domain; set mu explicitly")
        return Schedule(self.schedule.theta, mu)

    def to_dict(self) -> dict[str, Any]:
        """Flat resolved key/value view (the format accepted by ``from_mapping``)."""
        flat: dict[str, Any] = {key: getattr(self, key) for key in _TOP_LEVEL}
        for section in _SECTIONS:
            flat.update(dataclasses.asdict(getattr(self, section)))
        return flat

    def digest(self) -> str:
        """First 16 hex characters of the sha256 over the canonical resolved config."""
        relevant = {k: v for k, v in self.to_dict().items() if k not in _DIGEST_EXCLUDED}
        canonical = json.dumps(relevant, sort_keys=True, default=str)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
