"""Named verification suites run by ``opera verify``.

Each suite takes :class:`SuiteOptions` and returns one merged
:class:`~theory.report.VerificationReport`; sub-reports are listed under
``details["reports"]``. Suites never write files.
"""

from __future__ import annotations

import concurrent.futures
import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any, TypeVar

import numpy as np

from core.exceptions import ConfigurationError
from core.hypothesis import Expansion, isometry_check
from core.kernels import PairwiseKernel, kappa, parse_kernel_spec, parse_univariate_spec
from core.learner import ConstantStep, Schedule, lemma1_bound, pogd_default_eta, run
from core.measure import DiscreteMeasure, UniformNoise
from theory import concentration, decomposition, lemmas
from theory.report import VerificationReport
from theory.spectral import build_spectral_model, regular_measure

_logger = logging.getLogger(__name__)

_T = TypeVar("_T")
_R = TypeVar("_R")

DEFAULT_THETAS = (0.55, 0.6, 2.0 / 3.0, 0.75, 0.9)
DEFAULT_MUS = (1.0, 2.0)
DEFAULT_KERNEL = "induced(gaussian:0.5)"
NORM_BOUND_THETAS = (0.6, 2.0 / 3.0, 0.75)
PROJECTION_RADII = (0.1, 1.0, 10.0)


@dataclass
class SuiteOptions:
    """Parameters shared by all suites; ``None`` selects the suite default."""

    theta: float | None = None
    mu: float | None = None
    t_max: int = 5000
    T: int | None = None
    seed: int = 0
    trials: int | None = None
    beta: float | None = None
    delta: float | None = None
    dim: int | None = None
    m: int | None = None
    workers: int = 1
    extra: dict[str, Any] = field(default_factory=dict)

    def thetas(self, default: Sequence[float]) -> list[float]:
        return [self.theta] if self.theta is not None else list(default)


def _map(fn: Callable[[_T], _R], items: Iterable[_T], workers: int) -> list[_R]:
    """Order-preserving map, threaded when ``workers > 1``."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(fn, item) for item in items]
        return [f.result() for f in futures]


def _combine(name: str, parameters: dict[str, Any], parts: list[VerificationReport]) -> VerificationReport:
    report = VerificationReport(name, parameters)
    for part in parts:
        report.merge(part)
    report.details["reports"] = [part.as_dict() for part in parts]
    return report.finish()


def grid_measure(m: int, noise: float = 0.1) -> DiscreteMeasure:
    """``m`` equally weighted points on ``[-1, 1]`` with ``f_rho(x) = sin(pi x)``."""
    support = np.linspace(-1.0, 1.0, m).reshape(-1, 1)
    return DiscreteMeasure(
        support, np.full(m, 1.0 / m), np.sin(np.pi * support[:, 0]), UniformNoise(noise)
    )


def _induced_kernel(spec: str = DEFAULT_KERNEL) -> PairwiseKernel:
    k = parse_kernel_spec(spec, 1)
    assert isinstance(k, PairwiseKernel)
    return k


def _matched_schedule(k: PairwiseKernel, meas: DiscreteMeasure, theta: float) -> tuple[Schedule, float]:
    """Schedule with ``mu = kappa**2`` and the kappa it was built from."""
    kap = kappa(k, meas.support).value
    return Schedule(theta, kap**2), kap


def lemmas_suite(options: SuiteOptions) -> VerificationReport:
    mus = [options.mu] if options.mu is not None else list(DEFAULT_MUS)
    grid = [(theta, mu) for theta in options.thetas(DEFAULT_THETAS) for mu in mus]
    parts = _map(
        lambda case: lemmas.lemma_sum_checks(case[0], case[1], options.t_max),
        grid,
        options.workers,
    )
    report = _combine("lemmas", {"t_max": options.t_max, "cases": grid}, parts)
    report.details["statement_variant_violations"] = {
        f"theta={p.parameters['theta']:.4g},mu={p.parameters['mu']:g}": p.details[
            "statement_variant_violations"
        ]
        for p in parts
    }
    return report


def operators_suite(options: SuiteOptions) -> VerificationReport:
    betas = [options.beta] if options.beta is not None else [0.5, 1.0]
    theta = options.theta if options.theta is not None else 0.75
    mu = options.mu if options.mu is not None else 1.0
    seeds = np.random.SeedSequence(options.seed).spawn(len(betas))
    parts = _map(
        lambda item: lemmas.operator_product_norm_check(
            item[0],
            theta,
            mu,
            options.dim or 20,
            options.trials or 100,
            np.random.default_rng(item[1]),
        ),
        zip(betas, seeds),
        options.workers,
    )
    return _combine("operators", {"betas": betas, "theta": theta, "mu": mu}, parts)


def concentration_suite(options: SuiteOptions) -> VerificationReport:
    cases = [("bennett", d) for d in concentration.BENNETT_DISTRIBUTIONS] + [
        ("pinelis", d) for d in concentration.PINELIS_DISTRIBUTIONS
    ]
    delta = options.delta if options.delta is not None else 0.05
    t = options.T or 100
    seeds = np.random.SeedSequence(options.seed).spawn(len(cases))
    results = _map(
        lambda item: concentration.concentration_coverage(
            item[0][0],
            item[0][1],
            t,
            delta,
            options.trials or 10_000,
            np.random.default_rng(item[1]),
            dim=options.dim or 5,
        ),
        zip(cases, seeds),
        options.workers,
    )
    report = _combine(
        "concentration", {"t": t, "delta": delta}, [r.report() for r in results]
    )
    report.details["frequencies"] = {f"{r.kind}/{r.distribution}": r.frequency for r in results}
    return report


def _decomposition_case(
    seed: int, m: int, T: int, theta: float, delta: float
) -> VerificationReport:
    meas = grid_measure(m)
    k = _induced_kernel()
    schedule, kap = _matched_schedule(k, meas, theta)
    model = build_spectral_model(k, meas)
    rng = np.random.default_rng(seed)
    traj = run("opera-reduced", meas, k, T, rng, schedule=schedule, record_at="all")
    frame = decomposition.decomposition_frame(traj, model, meas, schedule)

    report = VerificationReport("decomposition-case", {"seed": seed, "m": m, "T": T})
    one_step = frame.one_step_residuals()
    report.record(float(one_step.max(initial=0.0)), 1e-8, check="one-step")
    unrolled = frame.unrolled_residual()
    report.record(unrolled, 1e-7, check="unrolled")

    X, y = traj.samples
    mc_rng = np.random.default_rng([seed, 1])
    worst_exact = 0.0
    for i in sorted({0, len(frame.steps) // 2, len(frame.steps) - 1}):
        t = frame.steps[i].t
        history = (X[: t - 1], y[: t - 1])
        exact = decomposition.conditional_mean_exact(model, meas, frame.f[i], history)
        scale = 1.0 + float(np.max(np.abs(frame.b_term(i))))
        worst_exact = max(worst_exact, float(np.max(np.abs(exact))))
        report.record(float(np.max(np.abs(exact))), 1e-10 * scale, check="exact-mean", t=t)
        mc = decomposition.conditional_mean_monte_carlo(model, meas, frame.f[i], history, mc_rng)
        report.record(mc.norm, decomposition.MC_SIGMAS * mc.stderr, check="mc-mean", t=t)

    report.merge(decomposition.hs_domination(frame))
    report.merge(decomposition.sample_error_terms(frame, schedule, kap, meas.M, delta))
    report.details = {
        "one_step_max": float(one_step.max(initial=0.0)),
        "unrolled": unrolled,
        "exact_mean_max": worst_exact,
    }
    return report.finish()


def decomposition_suite(options: SuiteOptions) -> VerificationReport:
    m = options.m or 5
    T = options.T or 50
    theta = options.theta if options.theta is not None else 2.0 / 3.0
    delta = options.delta if options.delta is not None else 0.1
    seeds = [options.seed + i for i in range(options.trials or 3)]
    parts = _map(
        lambda s: _decomposition_case(s, m, T, theta, delta), seeds, options.workers
    )
    return _combine("decomposition", {"m": m, "T": T, "theta": theta, "seeds": seeds}, parts)


def isometry_suite(options: SuiteOptions) -> VerificationReport:
    rng = np.random.default_rng(options.seed)
    dim = options.dim or 2
    report = VerificationReport("isometry", {"trials": options.trials or 100, "dim": dim})
    worst = 0.0
    for i in range(options.trials or 100):
        family = "gaussian:0.5" if i % 2 == 0 else "linear"
        base = parse_univariate_spec(family, dim)
        n = int(rng.integers(2, 12))
        coeffs = rng.standard_normal(n)
        coeffs -= coeffs.mean()
        g = Expansion(base, rng.uniform(-1.0, 1.0, size=(n, dim)), coeffs)
        norm_g, norm_k = isometry_check(g)
        gap = abs(norm_k - norm_g)
        worst = max(worst, gap)
        report.record(gap, 1e-8 * (1.0 + norm_g), trial=i, kernel=family)
    report.details = {"max_gap": worst}
    return report.finish()


def _equivalence_case(seed: int, m: int, T: int, theta: float) -> float:
    meas = grid_measure(m)
    k = _induced_kernel()
    schedule, _ = _matched_schedule(k, meas, theta)
    steps = sorted({2**j for j in range(int(np.log2(T + 1)) + 1)} | {T + 1})
    direct = run("opera-direct", meas, k, T, np.random.default_rng(seed), schedule=schedule, record_at=steps)
    reduced = run("opera-reduced", meas, k, T, np.random.default_rng(seed), schedule=schedule, record_at=steps)
    pairs = meas.grid_pairs()
    deviation = 0.0
    for a, b in zip(direct.records, reduced.records):
        gap = np.abs(a.hypothesis.evaluate_pairs(pairs) - b.hypothesis.evaluate_pairs(pairs))
        deviation = max(deviation, float(gap.max()))
    return deviation


def equivalence_suite(options: SuiteOptions) -> VerificationReport:
    m = options.m or 5
    T = options.T or 300
    theta = options.theta if options.theta is not None else 2.0 / 3.0
    seeds = [options.seed + i for i in range(options.trials or 5)]
    deviations = _map(lambda s: _equivalence_case(s, m, T, theta), seeds, options.workers)
    report = VerificationReport("equivalence", {"m": m, "T": T, "theta": theta, "seeds": seeds})
    for seed, dev in zip(seeds, deviations):
        report.record(dev, 1e-8, seed=seed)
    report.details = {"max_deviation": max(deviations)}
    return report.finish()


def _norm_bound_case(seed: int, theta: float, T: int, m: int) -> VerificationReport:
    meas = grid_measure(m)
    k = _induced_kernel()
    schedule, _ = _matched_schedule(k, meas, theta)
    report = VerificationReport("norm-bound-case", {"seed": seed, "theta": theta})

    def check(state: Any) -> None:
        allowed = lemma1_bound(schedule, meas.M, state.t)
        report.record(state.norm(), allowed * (1 + 1e-9), t=state.t)

    run("opera-reduced", meas, k, T, np.random.default_rng(seed), schedule=schedule, callback=check)
    return report.finish()


def norm_bound_suite(options: SuiteOptions) -> VerificationReport:
    T = options.T or 1000
    m = options.m or 8
    cases = [
        (options.seed + i, theta)
        for theta in options.thetas(NORM_BOUND_THETAS)
        for i in range(options.trials or 20)
    ]
    parts = _map(lambda c: _norm_bound_case(c[0], c[1], T, m), cases, options.workers)
    return _combine("norm-bound", {"T": T, "m": m, "cases": len(cases)}, parts)


def _projection_case(seed: int, R: float, T: int, m: int) -> VerificationReport:
    meas = grid_measure(m)
    k = _induced_kernel()
    kap = kappa(k, meas.support).value
    eta = pogd_default_eta(R, meas.M, kap, T)
    report = VerificationReport("projection-case", {"seed": seed, "R": R, "eta": eta})

    def check(state: Any) -> None:
        report.record(state.norm(), R * (1 + 1e-12), t=state.t)

    run("pogd", meas, k, T, np.random.default_rng(seed), R=R, eta=eta, callback=check)

    # a radius above the a priori norm bound never activates the projection
    big_R = 2.0 * lemma1_bound(ConstantStep(eta), meas.M, T + 1) + 1.0
    steps = [2, T // 2, T + 1]
    free = run("opera-reduced", meas, k, T, np.random.default_rng(seed), schedule=ConstantStep(eta), record_at=steps)
    inactive = run("pogd", meas, k, T, np.random.default_rng(seed), R=big_R, eta=eta, record_at=steps)
    pairs = meas.grid_pairs()
    gap = max(
        float(np.max(np.abs(a.hypothesis.evaluate_pairs(pairs) - b.hypothesis.evaluate_pairs(pairs))))
        for a, b in zip(free.records, inactive.records)
    )
    report.record(gap, 1e-10, check="inactive-projection")
    return report.finish()


def projection_suite(options: SuiteOptions) -> VerificationReport:
    T = options.T or 500
    m = options.m or 5
    cases = [(options.seed + i, R) for R in PROJECTION_RADII for i in range(options.trials or 3)]
    parts = _map(lambda c: _projection_case(c[0], c[1], T, m), cases, options.workers)
    return _combine("projection", {"T": T, "radii": list(PROJECTION_RADII)}, parts)


def approximation_suite(options: SuiteOptions) -> VerificationReport:
    m = options.m or 8
    beta = options.beta if options.beta is not None else 1.0
    theta = options.theta if options.theta is not None else 2.0 / 3.0
    k = _induced_kernel()
    model = build_spectral_model(k, grid_measure(m))
    meas, target = regular_measure(model, beta, 2.0, np.random.default_rng(options.seed))
    schedule, kap = _matched_schedule(k, meas, theta)
    t_values = sorted({int(t) for t in np.geomspace(2, options.T or 2000, 12)})
    return decomposition.approximation_error_check(
        model, target.values, schedule, kap, t_values, beta, target.source_norm
    )


SUITES: dict[str, Callable[[SuiteOptions], VerificationReport]] = {
    "lemmas": lemmas_suite,
    "operators": operators_suite,
    "concentration": concentration_suite,
    "decomposition": decomposition_suite,
    "isometry": isometry_suite,
    "equivalence": equivalence_suite,
    "norm-bound": norm_bound_suite,
    "projection": projection_suite,
    "approximation": approximation_suite,
}


def run_suite(name: str, options: SuiteOptions | None = None) -> VerificationReport:
    """Run the suite called *name*; unknown names raise ConfigurationError."""
    suite = SUITES.get(name)
    if suite is None:
        raise ConfigurationError(
            f"Unknown verification suite '{name}'. Available: {', '.join(SUITES)}"
        )
    options = options or SuiteOptions()
    _logger.info("Running verification suite %s", name)
    report = suite(options)
    report.parameters.setdefault("suite", name)
    _logger.info(
        "Suite %s: %d cases, %d violations", name, report.n_cases, report.n_violations
    )
    return report
