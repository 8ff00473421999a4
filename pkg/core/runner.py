"""Experiment orchestration shared by the ``run``, ``rates`` and ``compare`` commands.

``run_experiment`` performs **no** presentation or file output: it returns
``TrialResult`` objects that callers persist via ``core.writers`` and summarise
via :func:`summarize`. Trials run on a thread pool and are re-sorted by trial id,
so results never depend on completion order.

OPERA modes are run once per trial up to the largest horizon, since the first
``T`` steps of a longer run are the run of length ``T``. POGD's step size
depends on ``T``, so with ``record_at = final`` it is run separately for every
horizon; explicit record steps are taken from a single run of the largest ``T``.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from tqdm import tqdm

from core import constants
from core.config import ExperimentConfig
from core.exceptions import ConfigurationError, ValidationError
from core.kernels import PairwiseKernel
from core.learner import (
    ConstantStep,
    Schedule,
    StepRule,
    lemma1_bound,
    pogd_default_eta,
    pogd_paper_eta,
    resolve_record_at,
    run,
)
from core.measure import DiscreteMeasure, Measure, pairwise_target
from theory import bounds
from theory.k_functional import k_functional
from theory.spectral import build_spectral_model, regular_measure

_logger = logging.getLogger(__name__)


@dataclass
class ResultRow:
    t: int
    gamma_t: float | None
    error_rho: float
    error_rho_stderr: float | None
    norm_K: float
    lemma1_bound: float | None
    thm1_bound: float | None


@dataclass
class TrialResult:
    trial: int
    seed: int
    mode: str
    rows: list[ResultRow] = field(default_factory=list)
    averaged_error: float | None = None

    def as_dicts(self) -> list[dict[str, Any]]:
        """Rows in ``constants.RESULT_COLUMNS`` order."""
        return [
            {
                "trial": self.trial,
                "seed": self.seed,
                "t": r.t,
                "gamma_t": r.gamma_t,
                "error_rho": r.error_rho,
                "error_rho_stderr": r.error_rho_stderr,
                "norm_K": r.norm_K,
                "lemma1_bound": r.lemma1_bound,
                "thm1_bound": r.thm1_bound,
                "mode": self.mode,
            }
            for r in self.rows
        ]


@dataclass
class Problem:
    """Everything shared by all trials of one experiment."""

    cfg: ExperimentConfig
    measure: Measure
    kernel: PairwiseKernel
    kappa: float
    schedule: Schedule
    thm1: dict[int, float] = field(default_factory=dict)
    source_norm: float | None = None


def _theorem1_column(problem: Problem, steps: list[int]) -> dict[int, float]:
    """Theorem-1 bound for rows ``t = T + 1`` with ``T >= 4``; discrete measures only."""
    cfg = problem.cfg
    theta = problem.schedule.theta
    meas = problem.measure
    if not isinstance(meas, DiscreteMeasure) or not 0.5 < theta < 1.0:
        return {}
    if meas.m**2 > constants.SPECTRAL_GRID_CAP:
        _logger.warning("Support too large for the spectral backend; no Theorem-1 column")
        return {}
    model = build_spectral_model(problem.kernel, meas)
    target = model.grid_function(pairwise_target(meas))
    column: dict[int, float] = {}
    for t in steps:
        T = t - 1
        if T < 4:
            continue
        s = bounds.theorem1_s(theta, problem.schedule.mu, problem.kappa, T)
        column[t] = bounds.theorem1_bound(
            theta,
            problem.schedule.mu,
            problem.kappa,
            meas.M,
            T,
            cfg.delta,
            k_functional(model, target, s),
        )
    return column


def prepare(cfg: ExperimentConfig) -> Problem:
    """Build measure, kernel, schedule and the bound column for *cfg*."""
    kernel = cfg.build_kernel()
    meas = cfg.build_measure()
    source_norm = None
    if cfg.beta is not None:
        if not isinstance(meas, DiscreteMeasure):
            raise ConfigurationError("beta: spectral targets need a discrete measure")
        model = build_spectral_model(kernel, meas)
        target_seed = cfg.run.seed if cfg.target_seed is None else cfg.target_seed
        meas, target = regular_measure(
            model, cfg.beta, cfg.norm_target, np.random.default_rng([target_seed, 1])
        )
        source_norm = target.source_norm
    kap = cfg.kappa_value(meas)
    problem = Problem(cfg, meas, kernel, kap, cfg.build_schedule(kap), source_norm=source_norm)
    problem.thm1 = _theorem1_column(problem, _opera_steps(cfg))
    _logger.info(
        "Prepared %s on %s: kappa=%.4g, mu=%.4g, M=%.4g",
        kernel.spec,
        cfg.measure.kind,
        kap,
        problem.schedule.mu,
        meas.M,
    )
    return problem


def _is_final(cfg: ExperimentConfig) -> bool:
    return cfg.run.record_at in (None, "final")


def _opera_steps(cfg: ExperimentConfig) -> list[int]:
    """``final`` records ``T + 1`` for every horizon; anything else resolves against the largest."""
    if _is_final(cfg):
        return sorted({T + 1 for T in cfg.run.T})
    return resolve_record_at(cfg.run.record_at, max(cfg.run.T))


def resolve_eta(cfg: ExperimentConfig, M: float, kap: float, T: int) -> float:
    eta, R = cfg.run.eta, cfg.run.R
    if eta == "auto":
        if math.isinf(R):
            raise ConfigurationError("eta: give a number when R is infinite")
        return pogd_default_eta(R, M, kap, T)
    if eta == "paper":
        if math.isinf(R):
            raise ConfigurationError("eta: give a number when R is infinite")
        return pogd_paper_eta(R, T)
    return float(eta)


def _rows(trajectory: Any, rule: StepRule, problem: Problem, opera: bool) -> list[ResultRow]:
    """Row ``t`` holds ``f_t`` and the step ``gamma_{t-1}`` that produced it (none for t <= 2)."""
    rows = []
    for record in trajectory.records:
        rows.append(
            ResultRow(
                t=record.t,
                gamma_t=rule.step_size(record.t - 1) if record.t > 2 else None,
                error_rho=record.error.value,
                error_rho_stderr=record.error.stderr,
                norm_K=record.norm_K,
                lemma1_bound=lemma1_bound(rule, problem.measure.M, record.t) if opera else None,
                thm1_bound=problem.thm1.get(record.t) if opera else None,
            )
        )
    return rows


def run_trial(problem: Problem, trial: int, mode: str) -> TrialResult:
    """One trial of one mode with seed ``base_seed + trial``."""
    cfg = problem.cfg
    seed = cfg.run.seed + trial
    result = TrialResult(trial, seed, mode)
    common: dict[str, Any] = {
        "gram_cache": cfg.run.gram_cache,
        "track_average": cfg.run.track_average,
        "mc_pairs": cfg.measure.mc_pairs,
    }
    if mode != "pogd":
        T = max(cfg.run.T)
        trajectory = run(
            mode,
            problem.measure,
            problem.kernel,
            T,
            np.random.default_rng(seed),
            schedule=problem.schedule,
            record_at=_opera_steps(cfg),
            mc_rng=np.random.default_rng([seed, 2]),
            **common,
        )
        result.rows = _rows(trajectory, problem.schedule, problem, opera=True)
        if trajectory.averaged_error is not None:
            result.averaged_error = trajectory.averaged_error.value
        return result

    T_max = max(cfg.run.T)
    horizons = sorted(set(cfg.run.T)) if _is_final(cfg) else [T_max]
    for T in horizons:
        eta = resolve_eta(cfg, problem.measure.M, problem.kappa, T)
        trajectory = run(
            "pogd",
            problem.measure,
            problem.kernel,
            T,
            np.random.default_rng(seed),
            R=cfg.run.R,
            eta=eta,
            record_at=[T + 1] if _is_final(cfg) else _opera_steps(cfg),
            mc_rng=np.random.default_rng([seed, 2]),
            **common,
        )
        result.rows.extend(_rows(trajectory, ConstantStep(eta), problem, opera=False))
        if T == T_max and trajectory.averaged_error is not None:
            result.averaged_error = trajectory.averaged_error.value
    result.rows.sort(key=lambda r: r.t)
    return result


def run_experiment(
    cfg: ExperimentConfig, progress: bool = False, problem: Problem | None = None
) -> list[TrialResult]:
    """Run ``n_trials`` trials of every configured mode.

    Results are sorted by trial id and then by the configured mode order.
    """
    problem = problem or prepare(cfg)
    tasks = [(trial, mode) for trial in range(cfg.run.n_trials) for mode in cfg.run.modes]
    _logger.info("Running %d trial(s) x %d mode(s)", cfg.run.n_trials, len(cfg.run.modes))

    results: list[TrialResult]
    if cfg.run.workers <= 1:
        iterator = tqdm(tasks, desc="trials", disable=not progress)
        results = [run_trial(problem, trial, mode) for trial, mode in iterator]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.run.workers) as executor:
            futures = [executor.submit(run_trial, problem, trial, mode) for trial, mode in tasks]
            for _ in tqdm(
                concurrent.futures.as_completed(futures),
                total=len(futures),
                desc="trials",
                disable=not progress,
            ):
                pass
            results = [f.result() for f in futures]
    order = {mode: i for i, mode in enumerate(cfg.run.modes)}
    results.sort(key=lambda r: (r.trial, order[r.mode]))
    return results


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    residual: float
    t_min: int
    t_max: int
    n_points: int

    def as_dict(self) -> dict[str, Any]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "t_range": [self.t_min, self.t_max],
            "n_points": self.n_points,
        }


def medians_by_t(results: list[TrialResult], mode: str | None = None) -> dict[int, float]:
    """Median rho-error across trials for every recorded ``t``."""
    by_t: dict[int, list[float]] = defaultdict(list)
    for result in results:
        if mode is not None and result.mode != mode:
            continue
        for row in result.rows:
            by_t[row.t].append(row.error_rho)
    return {t: float(np.median(v)) for t, v in sorted(by_t.items())}


def fit_rate(
    results: list[TrialResult],
    t_min: int = constants.RATE_FIT_T_MIN,
    mode: str | None = None,
) -> RateFit:
    """Least-squares line through ``(log t, log median error)`` for ``t >= t_min``.

    Raises:
        ValidationError: With fewer than three usable ``t`` values.
    """
    medians = {t: e for t, e in medians_by_t(results, mode).items() if t >= t_min and e > 0}
    if len(medians) < 3:
        raise ValidationError(
            f"Rate fit needs at least 3 recorded t >= {t_min} with positive error, "
            f"got {len(medians)}"
        )
    ts = np.array(sorted(medians), dtype=float)
    log_t = np.log(ts)
    log_e = np.log([medians[int(t)] for t in ts])
    design = np.column_stack([log_t, np.ones_like(log_t)])
    (slope, intercept), *_ = np.linalg.lstsq(design, log_e, rcond=None)
    residual = float(np.sqrt(np.mean((design @ np.array([slope, intercept]) - log_e) ** 2)))
    return RateFit(float(slope), float(intercept), residual, int(ts[0]), int(ts[-1]), len(ts))


def bound_violation_fraction(results: list[TrialResult]) -> float | None:
    """Share of rows carrying a Theorem-1 bound whose error exceeds it."""
    checked = [
        row.error_rho > row.thm1_bound
        for result in results
        for row in result.rows
        if row.thm1_bound is not None
    ]
    if not checked:
        return None
    return float(np.mean(checked))


def summarize(
    results: list[TrialResult], cfg: ExperimentConfig, t_min: int = constants.RATE_FIT_T_MIN
) -> dict[str, Any]:
    """Summary JSON payload: digest, medians, rate fits and the bound-violation share."""
    modes = list(dict.fromkeys(r.mode for r in results))
    fits: dict[str, Any] = {}
    for mode in modes:
        try:
            fits[mode] = fit_rate(results, t_min, mode).as_dict()
        except ValidationError:
            fits[mode] = None
    primary = fits.get(modes[0]) if modes else None
    summary: dict[str, Any] = {
        "config_digest": cfg.digest(),
        "medians_by_t": {mode: medians_by_t(results, mode) for mode in modes},
        "rate_fit": (
            {"slope": primary["slope"], "intercept": primary["intercept"]} if primary else None
        ),
        "rate_fits": fits,
        "bound_violation_fraction": bound_violation_fraction(results),
        "n_trials": cfg.run.n_trials,
        "config": cfg.to_dict(),
    }
    if summary["bound_violation_fraction"] is not None:
        # thm1 uses the stated confidence; the proof tracks 1 - 2 delta with log(4T/delta).
        summary["thm1_form"] = {
            "confidence": 1.0 - cfg.delta,
            "log_factor": "log(8T/delta)",
            "proof_form": "1 - 2 delta, log(4T/delta)",
        }
    if cfg.beta is not None:
        summary["expected_slope"] = -bounds.theorem2_exponent(cfg.beta)
        summary["theorem2_theta"] = bounds.theorem2_theta(cfg.beta)
    averaged = {
        mode: float(np.median([r.averaged_error for r in results if r.mode == mode]))
        for mode in modes
        if any(r.mode == mode and r.averaged_error is not None for r in results)
    }
    if averaged:
        summary["averaged_error_median"] = averaged
    return summary


@dataclass
class PairedRow:
    trial: int
    seed: int
    t: int
    opera_error: float
    pogd_error: float
    opera_norm: float
    pogd_norm: float


@dataclass
class Comparison:
    opera_mode: str
    results: list[TrialResult]
    paired: list[PairedRow]
    summary: dict[str, Any]


def pair_results(results: list[TrialResult], opera_mode: str) -> list[PairedRow]:
    """Join OPERA and POGD rows on ``(seed, t)``."""
    pogd = {
        (r.seed, row.t): row for r in results if r.mode == "pogd" for row in r.rows
    }
    paired = []
    for result in results:
        if result.mode != opera_mode:
            continue
        for row in result.rows:
            other = pogd.get((result.seed, row.t))
            if other is not None:
                paired.append(
                    PairedRow(
                        result.trial,
                        result.seed,
                        row.t,
                        row.error_rho,
                        other.error_rho,
                        row.norm_K,
                        other.norm_K,
                    )
                )
    return paired


def compare_modes(cfg: ExperimentConfig, progress: bool = False) -> Comparison:
    """Run an OPERA mode and POGD on the same seeds and pair their rows.

    The averaged iterate is always tracked so the summary can report it next to
    the last iterate.
    """
    opera_modes = [m for m in cfg.run.modes if m != "pogd"]
    if "pogd" not in cfg.run.modes or not opera_modes:
        raise ConfigurationError("modes: compare needs pogd and one opera mode")
    cfg = dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, track_average=True))
    results = run_experiment(cfg, progress)
    paired = pair_results(results, opera_modes[0])
    summary = summarize(results, cfg)
    finals = {T + 1 for T in cfg.run.T}
    summary["final_median_error"] = {
        mode: {t: v for t, v in summary["medians_by_t"][mode].items() if t in finals}
        for mode in summary["medians_by_t"]
    }
    summary["paired_rows"] = len(paired)
    return Comparison(opera_modes[0], results, paired, summary)
