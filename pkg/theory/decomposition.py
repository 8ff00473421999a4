"""One-step error decomposition of OPERA on the support grid.

With ``E_t = f_t - f~`` every update reads

    E_{t+1} = (I - gamma_t L_K) E_t - gamma_t A^t - gamma_t B^t

where, for the grid operators built from the first ``t`` samples,

* ``L^_t h = K (c^_t * h)`` with ``c^_t(a, b) = #{j < t : (x_t, x_j) = (u_a, u_b)} / (t - 1)``,
* ``S^_t = K s^_t`` with ``s^_t(a, b) = sum_{j : (x_t, x_j) = (u_a, u_b)} (y_t - y_j) / (t - 1)``,
* ``L~_t`` and ``S~_t`` are their expectations over ``z_t`` given the history,
* ``A^t = (L~_t - L_K) f_t - (S~_t - L_K f~)`` and ``B^t = (L^_t - L~_t) f_t - (S^_t - S~_t)``.

Every operator here is ``K diag(v)`` for a grid vector ``v``, so frames store
those vectors rather than matrices.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from core.exceptions import ValidationError
from core.learner import StepRule, Trajectory
from core.measure import DiscreteMeasure, pairwise_target, sample_many
from theory import bounds
from theory.k_functional import k_functional
from theory.report import VerificationReport
from theory.spectral import SpectralModel

_logger = logging.getLogger(__name__)

MC_RESAMPLES = 2000
MC_SIGMAS = 5.0


@dataclass
class StepOperators:
    """Grid vectors of the empirical and conditional-mean operators at one step."""

    t: int
    gamma: float
    c_hat: np.ndarray
    s_hat: np.ndarray
    c_tilde: np.ndarray
    s_tilde: np.ndarray


def _history_counts(
    history_idx: np.ndarray, history_y: np.ndarray, m: int
) -> tuple[np.ndarray, np.ndarray]:
    counts = np.bincount(history_idx, minlength=m).astype(float)
    ysums = np.bincount(history_idx, weights=history_y, minlength=m)
    return counts, ysums


def _conditional_vectors(
    meas: DiscreteMeasure, counts: np.ndarray, ysums: np.ndarray, t: int
) -> tuple[np.ndarray, np.ndarray]:
    """``c~`` and ``s~``: the empirical vectors averaged over ``x_t ~ p``, ``y_t | x_t``."""
    p = meas.probs
    c_tilde = np.outer(p, counts) / (t - 1)
    s_tilde = p[:, None] * (np.outer(meas.f_rho_values, counts) - ysums[None, :]) / (t - 1)
    return c_tilde.ravel(), s_tilde.ravel()


def _empirical_vectors(
    m: int, a: int, y_t: float, counts: np.ndarray, ysums: np.ndarray, t: int
) -> tuple[np.ndarray, np.ndarray]:
    c_hat = np.zeros((m, m))
    s_hat = np.zeros((m, m))
    c_hat[a] = counts / (t - 1)
    s_hat[a] = (counts * y_t - ysums) / (t - 1)
    return c_hat.ravel(), s_hat.ravel()


@dataclass
class DecompositionFrame:
    """Per-step grid representation of the error decomposition along one trajectory.

    ``f[i]`` holds ``f_{i+2}`` on the grid for ``i = 0 .. T - 1``, so ``f[-1]`` is
    the final iterate ``f_{T+1}``.
    """

    model: SpectralModel
    target: np.ndarray
    f: np.ndarray
    steps: list[StepOperators] = field(default_factory=list)

    @property
    def T(self) -> int:
        return len(self.steps) + 1

    def _k(self, v: np.ndarray) -> np.ndarray:
        return self.model.kernel_matrix @ v

    def a_term(self, i: int) -> np.ndarray:
        """``A^t`` for ``t = steps[i].t``."""
        op = self.steps[i]
        w = self.model.weights
        f_t = self.f[i]
        return self._k((op.c_tilde - w) * f_t - op.s_tilde + w * self.target)

    def b_term(self, i: int) -> np.ndarray:
        """``B^t`` for ``t = steps[i].t``."""
        op = self.steps[i]
        return self._k((op.c_hat - op.c_tilde) * self.f[i] - op.s_hat + op.s_tilde)

    def l_hat_apply(self, i: int) -> np.ndarray:
        op = self.steps[i]
        return self._k(op.c_hat * self.f[i]) - self._k(op.s_hat)

    def one_step_residuals(self) -> np.ndarray:
        """``max |E_{t+1} - (I - gamma L) E_t + gamma A^t + gamma B^t|`` for every step."""
        out = np.empty(len(self.steps))
        for i, op in enumerate(self.steps):
            err = self.f[i] - self.target
            predicted = (
                err
                - op.gamma * self.model.apply(err)
                - op.gamma * self.a_term(i)
                - op.gamma * self.b_term(i)
            )
            out[i] = float(np.max(np.abs(self.f[i + 1] - self.target - predicted)))
        return out

    def omega_factors(self, start_offset: int = 0) -> np.ndarray:
        """Eigen-multipliers of ``omega^T_{j}`` for ``j = steps[k].t + start_offset``.

        Row ``k`` holds ``prod_{l = t_k + start_offset}^{T} (1 - gamma_l lam)``; with
        ``start_offset = 1`` this is ``omega^T_{t_k + 1}`` (the identity for the
        last step).
        """
        lam = self.model.eigenvalues
        n = len(self.steps)
        factors = np.ones((n + 1, len(lam)))
        for k in range(n - 1, -1, -1):
            factors[k] = factors[k + 1] * (1.0 - self.steps[k].gamma * lam)
        return factors[start_offset : start_offset + n]

    def _apply_factor(self, factor: np.ndarray, h: np.ndarray) -> np.ndarray:
        return self.model.from_coordinates(factor * self.model.coordinates(h))

    def drift_and_martingale_sums(self) -> tuple[np.ndarray, np.ndarray]:
        """``sum_j gamma_j omega^T_{j+1} A^j`` and the same sum over ``B^j``."""
        factors = self.omega_factors(start_offset=1)
        drift = np.zeros(self.model.size)
        martingale = np.zeros(self.model.size)
        for i, op in enumerate(self.steps):
            drift += op.gamma * self._apply_factor(factors[i], self.a_term(i))
            martingale += op.gamma * self._apply_factor(factors[i], self.b_term(i))
        return drift, martingale

    def approximation_term(self) -> np.ndarray:
        """``omega^T_2 f~``."""
        factors = self.omega_factors(start_offset=0)
        return self._apply_factor(factors[0], self.target)

    def unrolled_residual(self) -> float:
        """``max |E_{T+1} + omega^T_2 f~ + sum_j gamma_j omega^T_{j+1} (A^j + B^j)|``."""
        drift, martingale = self.drift_and_martingale_sums()
        predicted = -self.approximation_term() - drift - martingale
        return float(np.max(np.abs(self.f[-1] - self.target - predicted)))


def _check_inputs(trajectory: Trajectory, model: SpectralModel, meas: DiscreteMeasure) -> None:
    grid = model.measure
    if not (
        np.array_equal(grid.support, meas.support) and np.array_equal(grid.probs, meas.probs)
    ):
        raise ValidationError("spectral model was built on a different support or marginal")
    if trajectory.mode == "pogd":
        raise ValidationError("the decomposition describes unprojected OPERA trajectories")
    recorded = [r.t for r in trajectory.records]
    needed = list(range(2, trajectory.T + 2))
    if not set(needed).issubset(recorded):
        raise ValidationError("trajectory must record every step (record_at='all')")


def decomposition_frame(
    trajectory: Trajectory,
    model: SpectralModel,
    meas: DiscreteMeasure,
    schedule: StepRule,
) -> DecompositionFrame:
    """Assemble grid representations of every step of *trajectory*."""
    _check_inputs(trajectory, model, meas)
    X, y = trajectory.samples
    idx = meas.index_of(X)
    m = meas.m
    by_t = {r.t: r for r in trajectory.records}
    f = np.stack(
        [model.grid_function(by_t[t].hypothesis) for t in range(2, trajectory.T + 2)]
    )
    frame = DecompositionFrame(
        model=model,
        target=model.grid_function(pairwise_target(meas)),
        f=f,
    )
    for t in range(2, trajectory.T + 1):
        counts, ysums = _history_counts(idx[: t - 1], y[: t - 1], m)
        c_hat, s_hat = _empirical_vectors(m, int(idx[t - 1]), float(y[t - 1]), counts, ysums, t)
        c_tilde, s_tilde = _conditional_vectors(meas, counts, ysums, t)
        frame.steps.append(
            StepOperators(t, schedule.step_size(t), c_hat, s_hat, c_tilde, s_tilde)
        )
    return frame


def decomposition_residual(
    trajectory: Trajectory,
    model: SpectralModel,
    meas: DiscreteMeasure,
    schedule: StepRule,
) -> float:
    """Largest residual of the one-step recursion and of its unrolled form."""
    frame = decomposition_frame(trajectory, model, meas, schedule)
    one_step = frame.one_step_residuals()
    worst = max(float(one_step.max(initial=0.0)), frame.unrolled_residual())
    _logger.debug("Decomposition residual over %d steps: %.3e", len(frame.steps), worst)
    return worst


def _b_for_samples(
    model: SpectralModel,
    meas: DiscreteMeasure,
    f_t: np.ndarray,
    counts: np.ndarray,
    ysums: np.ndarray,
    t: int,
    idx: np.ndarray,
    y_t: np.ndarray,
) -> np.ndarray:
    """``B^t`` for each candidate ``z_t = (u_idx, y_t)``, one grid function per row."""
    m = meas.m
    c_tilde, s_tilde = _conditional_vectors(meas, counts, ysums, t)
    base = -c_tilde * f_t + s_tilde
    blocks = (np.outer(np.ones(len(idx)), counts) * f_t.reshape(m, m)[idx]) / (t - 1)
    blocks -= (np.outer(y_t, counts) - ysums[None, :]) / (t - 1)
    vectors = np.tile(base, (len(idx), 1))
    rows = idx[:, None] * m + np.arange(m)[None, :]
    np.add.at(vectors, (np.arange(len(idx))[:, None], rows), blocks)
    return vectors @ model.kernel_matrix.T


def conditional_mean_exact(
    model: SpectralModel,
    meas: DiscreteMeasure,
    f_t: np.ndarray,
    history: tuple[np.ndarray, np.ndarray],
) -> np.ndarray:
    """``E[B^t | z_1, ..., z_{t-1}]`` by summing over the support.

    ``B^t`` is affine in ``y_t``, so conditioning on ``x_t = u_a`` replaces ``y_t``
    by ``f_rho(u_a)``. The result vanishes up to round-off.
    """
    X_prev, y_prev = history
    t = len(y_prev) + 1
    if t < 2:
        raise ValidationError("the decomposition starts at t = 2")
    counts, ysums = _history_counts(meas.index_of(X_prev), np.asarray(y_prev), meas.m)
    support = np.arange(meas.m)
    per_point = _b_for_samples(model, meas, f_t, counts, ysums, t, support, meas.f_rho_values)
    return meas.probs @ per_point


@dataclass(frozen=True)
class MonteCarloMean:
    norm: float
    stderr: float

    @property
    def passed(self) -> bool:
        return self.norm <= MC_SIGMAS * self.stderr


def conditional_mean_monte_carlo(
    model: SpectralModel,
    meas: DiscreteMeasure,
    f_t: np.ndarray,
    history: tuple[np.ndarray, np.ndarray],
    rng: np.random.Generator,
    n: int = MC_RESAMPLES,
) -> MonteCarloMean:
    """rho-norm of the average of ``B^t`` over *n* fresh draws of ``z_t``.

    The standard error is ``sqrt(sum_w Var / n)`` taken pointwise on the grid.
    """
    X_prev, y_prev = history
    t = len(y_prev) + 1
    counts, ysums = _history_counts(meas.index_of(X_prev), np.asarray(y_prev), meas.m)
    X_new, y_new = sample_many(meas, rng, n)
    draws = _b_for_samples(model, meas, f_t, counts, ysums, t, meas.index_of(X_new), y_new)
    mean = draws.mean(axis=0)
    variance = draws.var(axis=0, ddof=1)
    return MonteCarloMean(
        norm=model.rho_norm(mean),
        stderr=float(math.sqrt(np.sum(model.weights * variance) / n)),
    )


def hs_domination(frame: DecompositionFrame) -> VerificationReport:
    """The L2_rho operator norm of ``L^_t - L~_t`` and ``L~_t - L_K`` never exceeds their HS norm."""
    model = frame.model
    report = VerificationReport("hs-domination", {"T": frame.T})
    for op in frame.steps:
        for name, vector in (
            ("hat-tilde", op.c_hat - op.c_tilde),
            ("tilde-population", op.c_tilde - model.weights),
        ):
            matrix = model.in_rho_basis(model.operator(vector))
            spectral = float(np.linalg.norm(matrix, 2))
            frobenius = float(np.linalg.norm(matrix, "fro"))
            report.record(spectral, frobenius * (1 + 1e-12), t=op.t, operator=name)
    return report.finish()


def sample_error_terms(
    frame: DecompositionFrame,
    schedule: StepRule,
    kappa: float,
    M: float,
    delta: float,
) -> VerificationReport:
    """Realised drift and martingale sums at ``T`` against their high-probability bounds."""
    T = frame.T
    drift, martingale = frame.drift_and_martingale_sums()
    report = VerificationReport(
        "sample-error", {"T": T, "kappa": kappa, "M": M, "delta": delta}
    )
    drift_norm = frame.model.rho_norm(drift)
    martingale_norm = frame.model.rho_norm(martingale)
    drift_bound = bounds.theorem4_bound(schedule, kappa, M, T, delta)
    martingale_bound = bounds.theorem5_bound(schedule, kappa, M, T, delta)
    report.record(drift_norm, drift_bound, term="drift")
    report.record(martingale_norm, martingale_bound, term="martingale")
    report.details = {
        "drift": drift_norm,
        "drift_bound": drift_bound,
        "martingale": martingale_norm,
        "martingale_bound": martingale_bound,
    }
    return report.finish()


def approximation_error_check(
    model: SpectralModel,
    target: np.ndarray,
    schedule: StepRule,
    kappa: float,
    t_values: list[int],
    beta: float | None = None,
    source_norm: float | None = None,
) -> VerificationReport:
    """``||omega^t_2 f~||_rho`` against the K-functional bound and, with *beta*, the source bound."""
    report = VerificationReport(
        "approximation", {"kappa": kappa, "beta": beta, "t_values": list(t_values)}
    )
    coords = model.coordinates(np.asarray(target, dtype=float))
    lam = model.eigenvalues
    for t in sorted(t_values):
        if t < 2:
            raise ValidationError("t must be at least 2")
        gammas = np.array([schedule.step_size(ell) for ell in range(2, t + 1)])
        factor = np.prod(1.0 - np.outer(gammas, lam), axis=0)
        observed = float(np.linalg.norm(factor * coords))
        s = bounds.approximation_s(schedule, kappa, t)
        report.record(observed, k_functional(model, target, s), t=t, bound="k-functional")
        if beta is not None and source_norm is not None:
            allowed = bounds.approximation_source_bound(schedule, kappa, t, beta, source_norm)
            report.record(observed, allowed * (1 + 1e-12), t=t, bound="source")
    return report.finish()
