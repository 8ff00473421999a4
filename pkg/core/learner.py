"""OPERA, its reduced form for induced kernels, and projected online gradient descent.

Step ``t >= 2`` consumes ``z_t = (x_t, y_t)`` and updates

    f_{t+1} = f_t - gamma_t / (t - 1) * sum_{j < t} (f_t(x_t, x_j) - y_t + y_j) K_{(x_t, x_j)}

with ``f_1 = f_2 = 0``. Two execution modes share the state object:

* ``direct`` keeps ``f_t`` as a pairwise expansion and appends ``t - 1`` terms per
  step. Works for every pairwise kernel.
* ``reduced`` (induced kernels only) keeps ``g_t`` with ``f_t = g_t(x) - g_t(x')``
  as one coefficient per history point, plus a cache of ``g_t(x_i)`` and
  optionally the history Gram. A step costs O(t^2) arithmetic.

Steps advance the state in place and return it.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np

from core import constants
from core.exceptions import ConfigurationError, StateError, ValidationError
from core.hypothesis import (
    Expansion,
    LiftedHypothesis,
    add_scaled_terms,
    difference,
    project_ball,
)
from core.kernels import PairwiseKernel, UnivariateKernel, as_point
from core.measure import (
    DiscreteMeasure,
    Estimate,
    Measure,
    pairwise_target,
    rho_norm,
    sample_many,
)

_logger = logging.getLogger(__name__)

MODES = ("opera-direct", "opera-reduced", "pogd")


@dataclass(frozen=True)
class Schedule:
    """``gamma_t = t**(-theta) / mu``."""

    theta: float
    mu: float

    def __post_init__(self) -> None:
        if not 0.0 < self.theta < 1.0:
            raise ValidationError(f"theta must lie in (0, 1), got {self.theta}")
        if not self.mu > 0.0:
            raise ValidationError(f"mu must be positive, got {self.mu}")

    def step_size(self, t: int) -> float:
        return step_size(self, t)

    def partial_sum(self, start: int, stop: int) -> float:
        """``sum_{l=start}^{stop} gamma_l`` (zero for an empty range)."""
        if stop < start:
            return 0.0
        ell = np.arange(max(start, 1), stop + 1, dtype=float)
        return float(np.sum(ell ** (-self.theta)) / self.mu)


@dataclass(frozen=True)
class ConstantStep:
    """A constant step ``eta`` (the POGD choice, or OPERA with matched steps)."""

    eta: float

    def __post_init__(self) -> None:
        if not self.eta > 0.0:
            raise ValidationError(f"eta must be positive, got {self.eta}")

    def step_size(self, t: int) -> float:
        if t < 1:
            raise ValidationError("step index must be at least 1")
        return self.eta

    def partial_sum(self, start: int, stop: int) -> float:
        return self.eta * max(stop - max(start, 1) + 1, 0)


StepRule = Union[Schedule, ConstantStep]


def step_size(s: Schedule, t: int) -> float:
    if t < 1:
        raise ValidationError("step index must be at least 1")
    return float(t ** (-s.theta) / s.mu)


def lemma1_bound(s: StepRule, M: float, t: int) -> float:
    """``2 M sqrt(sum_{j=2}^{t-1} gamma_j)``, the a priori bound on ``||f_t||_K``."""
    return float(2.0 * M * np.sqrt(s.partial_sum(2, t - 1)))


def pogd_default_eta(R: float, M: float, kappa: float, T: int) -> float:
    """``R / ((2M + kappa R) sqrt(T))``."""
    return float(R / ((2.0 * M + kappa * R) * np.sqrt(T)))


def pogd_paper_eta(R: float, T: int) -> float:
    """``R**2 / T``."""
    return float(R * R / T)


class _Growable:
    """Preallocated buffer that doubles its capacity on demand."""

    def __init__(self, shape_tail: tuple[int, ...], capacity: int = 16) -> None:
        self.data = np.zeros((capacity, *shape_tail))
        self.n = 0

    def reserve(self, n: int) -> None:
        if n > len(self.data):
            new = np.zeros((max(n, 2 * len(self.data)), *self.data.shape[1:]))
            new[: self.n] = self.data[: self.n]
            self.data = new

    def append(self, row: Any) -> None:
        self.reserve(self.n + 1)
        self.data[self.n] = row
        self.n += 1

    def view(self) -> np.ndarray:
        return self.data[: self.n]


class OperaState:
    """Learner state holding ``f_t`` (direct) or ``g_t`` (reduced) and the history.

    ``t`` is the index of the next sample: a fresh state has ``t == 1`` and
    ``f_1 = 0``; after the first sample ``t == 2`` and ``f_2 = 0``.
    """

    def __init__(
        self,
        kernel: PairwiseKernel,
        mode: str = "reduced",
        *,
        gram_cache: bool = True,
        track_average: bool = False,
    ) -> None:
        if mode not in ("direct", "reduced"):
            raise ConfigurationError(f"Unknown execution mode '{mode}'")
        if mode == "reduced" and not kernel.is_induced:
            raise ConfigurationError(
                f"Reduced mode needs an induced kernel, got {kernel.spec}"
            )
        self.kernel = kernel
        self.mode = mode
        self.t = 1
        self._x = _Growable((kernel.domain_dim,))
        self._y = _Growable(())
        self._f = Expansion.empty(kernel)
        self._f_sum = np.zeros(0)
        self._gram_cache = gram_cache and mode == "reduced"
        self._alpha = _Growable(())
        self._values = _Growable(())
        self._alpha_sum = _Growable(())
        self._gram = np.zeros((0, 0))
        self._track_average = track_average

    @property
    def base(self) -> UnivariateKernel:
        assert self.kernel.base is not None
        return self.kernel.base

    @property
    def history(self) -> tuple[np.ndarray, np.ndarray]:
        return self._x.view(), self._y.view()

    @property
    def value_cache(self) -> np.ndarray:
        """``g_t(x_i)`` for every history point (reduced mode)."""
        return self._values.view()

    @property
    def f(self) -> Expansion:
        if self.mode != "direct":
            raise StateError("f is only stored in direct mode; use g or hypothesis()")
        return self._f

    @property
    def g(self) -> Expansion:
        """``g_t`` with coincident history points merged."""
        if self.mode != "reduced":
            raise StateError("g is only stored in reduced mode")
        return add_scaled_terms(
            Expansion.empty(self.base), self._x.view(), self._alpha.view(), merge=True
        )

    def hypothesis(self) -> Expansion | LiftedHypothesis:
        """A pairwise-evaluable snapshot of ``f_t``."""
        if self.mode == "direct":
            return self._f
        return LiftedHypothesis(self.g)

    def norm(self) -> float:
        """``||f_t||_K`` (equal to ``||g_t||_G`` in reduced mode)."""
        if self.mode == "direct":
            return self._f.rkhs_norm()
        sq = float(self._alpha.view() @ self._values.view())
        return float(np.sqrt(max(sq, 0.0)))

    def averaged(self) -> Expansion | LiftedHypothesis:
        """``(f_1 + ... + f_T) / T`` for ``T = t - 1``."""
        if not self._track_average:
            raise StateError("averaged iterate was not tracked for this state")
        T = self.t - 1
        if T < 1:
            raise StateError("no iterates yet")
        if self.mode == "direct":
            coeffs = (self._f_sum - self._f.coefficients) / T
            return Expansion(self.kernel, self._f.centers, coeffs)
        coeffs = (self._alpha_sum.view() - self._alpha.view()) / T
        g_bar = add_scaled_terms(
            Expansion.empty(self.base), self._x.view(), coeffs, merge=True
        )
        return LiftedHypothesis(g_bar)

    def observe(self, x: object, y: float) -> OperaState:
        """Record ``z_1`` (no update since ``f_2 = f_1 = 0``)."""
        if self.t != 1:
            raise StateError("observe() only takes the first sample")
        self._append(as_point(x, self.kernel.domain_dim)[0], float(y))
        self.t = 2
        self._accumulate()
        return self

    def _append(self, x: np.ndarray, y: float) -> None:
        self._x.append(x)
        self._y.append(y)
        if self.mode == "reduced":
            self._alpha.append(0.0)
            self._alpha_sum.append(0.0)
            self._values.append(0.0)
            n = self._x.n
            row = self.base.matrix(x.reshape(1, -1), self._x.view())[0]
            # g_t(x_t) from the current coefficients; x_t itself has weight 0
            self._values.data[n - 1] = float(self._alpha.view() @ row)
            if self._gram_cache:
                if n > len(self._gram):
                    grown = np.zeros((max(n, 2 * len(self._gram), 16),) * 2)
                    grown[: n - 1, : n - 1] = self._gram[: n - 1, : n - 1]
                    self._gram = grown
                self._gram[n - 1, :n] = row
                self._gram[:n, n - 1] = row

    def _accumulate(self) -> None:
        if not self._track_average:
            return
        if self.mode == "direct":
            pad = len(self._f) - len(self._f_sum)
            self._f_sum = np.concatenate([self._f_sum, np.zeros(pad)])
            self._f_sum += self._f.coefficients
        else:
            self._alpha_sum.data[: self._alpha.n] += self._alpha.view()

    def _check_ready(self, x: np.ndarray) -> None:
        if self.t < 2:
            raise StateError("OPERA steps start at t = 2; observe z_1 first")
        if self._x.n != self.t - 1:
            raise StateError("history length does not match the step counter")

    def gradient_step(self, x: object, y: float, gamma: float) -> None:
        """One functional-gradient step on the local empirical error at ``z_t``."""
        point = as_point(x, self.kernel.domain_dim)[0]
        self._check_ready(point)
        t = self.t
        X_prev, y_prev = self.history
        if self.mode == "direct":
            pairs = np.stack([np.broadcast_to(point, X_prev.shape), X_prev], axis=1)
            residual = self._f.evaluate(pairs) - y + y_prev
            self._f = add_scaled_terms(self._f, pairs, -gamma / (t - 1) * residual)
            self._append(point, y)
        else:
            self._append(point, y)
            values = self._values.view()
            d = values[-1] - values[:-1] - y + y_prev
            delta = np.empty(t)
            delta[:-1] = gamma * d / (t - 1)
            delta[-1] = -gamma * float(np.mean(d))
            self._alpha.data[:t] += delta
            if self._gram_cache:
                gram = self._gram[:t, :t]
            else:
                points = self._x.view()
                gram = self.base.matrix(points, points)
            self._values.data[:t] += gram @ delta
        self.t = t + 1

    def scale(self, factor: float) -> None:
        if self.mode == "direct":
            self._f = self._f.scaled(factor)
        else:
            self._alpha.data[: self._alpha.n] *= factor
            self._values.data[: self._values.n] *= factor

    def project(self, R: float) -> None:
        if self.mode == "direct":
            self._f = project_ball(self._f, R)
            return
        if R == 0:
            self.scale(0.0)
            return
        norm = self.norm()
        if norm > R:
            self.scale(R / norm)

    def finish_step(self) -> None:
        self._accumulate()


class PogdState(OperaState):
    """OPERA state whose iterates are projected onto the ball of radius ``R``."""

    def __init__(
        self,
        kernel: PairwiseKernel,
        R: float,
        eta: float,
        mode: str = "reduced",
        **kwargs: Any,
    ) -> None:
        if not R > 0:
            raise ConfigurationError(f"POGD radius must be positive, got {R}")
        if not eta > 0:
            raise ConfigurationError(f"POGD step size must be positive, got {eta}")
        super().__init__(kernel, mode, **kwargs)
        self.R = float(R)
        self.eta = float(eta)


def initial_state(
    kernel: PairwiseKernel,
    z1: tuple[object, float],
    mode: str = "reduced",
    **kwargs: Any,
) -> OperaState:
    """State at ``t = 2`` after consuming ``z_1``."""
    return OperaState(kernel, mode, **kwargs).observe(*z1)


def opera_step(
    state: OperaState, z_t: tuple[object, float], s: StepRule
) -> OperaState:
    """Direct OPERA update on a pairwise expansion."""
    if state.t < 2:
        raise StateError("OPERA steps start at t = 2")
    if state.mode != "direct":
        raise StateError("opera_step() needs a direct-mode state")
    state.gradient_step(z_t[0], float(z_t[1]), s.step_size(state.t))
    state.finish_step()
    return state


def opera_reduced_step(
    state: OperaState, z_t: tuple[object, float], s: StepRule
) -> OperaState:
    """OPERA update carried out on ``g_t`` in the univariate space."""
    if not state.kernel.is_induced:
        raise ConfigurationError("The reduced step needs an induced kernel")
    if state.t < 2:
        raise StateError("OPERA steps start at t = 2")
    if state.mode != "reduced":
        raise StateError("opera_reduced_step() needs a reduced-mode state")
    state.gradient_step(z_t[0], float(z_t[1]), s.step_size(state.t))
    state.finish_step()
    return state


def pogd_step(
    state: PogdState, z_t: tuple[object, float], eta: float | None = None
) -> PogdState:
    """Gradient step with constant ``eta`` followed by projection onto the R-ball."""
    if state.t < 2:
        raise StateError("POGD steps start at t = 2")
    step = state.eta if eta is None else eta
    if not step > 0:
        raise ConfigurationError("POGD step size must be positive")
    state.gradient_step(z_t[0], float(z_t[1]), step)
    state.project(state.R)
    state.finish_step()
    return state


def resolve_record_at(record_at: object, T: int) -> list[int]:
    """Normalise a record specification to sorted steps in ``[1, T + 1]``.

    Accepts ``None``/``"final"`` (only ``T + 1``), ``"all"``, ``"log2"`` (powers of
    two up to ``T + 1``) or an iterable of integers.
    """
    if record_at is None or record_at == "final":
        steps = [T + 1]
    elif record_at == "all":
        steps = list(range(1, T + 2))
    elif record_at == "log2":
        steps = [2**k for k in range(0, int(np.log2(T + 1)) + 1)]
    elif isinstance(record_at, Iterable) and not isinstance(record_at, str):
        steps = sorted({int(v) for v in record_at})
    else:
        raise ValidationError(f"Invalid record_at specification: {record_at!r}")
    bad = [s for s in steps if not 1 <= s <= T + 1]
    if bad:
        raise ValidationError(f"record_at steps {bad} fall outside [1, {T + 1}]")
    return steps


@dataclass
class StepRecord:
    """Snapshot of ``f_t`` with its norm and rho-error."""

    t: int
    hypothesis: Any
    norm_K: float
    error: Estimate


@dataclass
class Trajectory:
    mode: str
    T: int
    records: list[StepRecord]
    samples: tuple[np.ndarray, np.ndarray]
    averaged_error: Estimate | None = None
    averaged: Any = None
    steps: list[float] = field(default_factory=list)


def _engine_mode(mode: str, kernel: PairwiseKernel) -> str:
    if mode == "opera-direct":
        return "direct"
    if mode == "opera-reduced":
        if not kernel.is_induced:
            raise ConfigurationError(
                f"opera-reduced needs an induced kernel, got {kernel.spec}"
            )
        return "reduced"
    if mode == "pogd":
        return "reduced" if kernel.is_induced else "direct"
    raise ConfigurationError(f"Unknown mode '{mode}'. Available: {', '.join(MODES)}")


def run(
    mode: str,
    meas: Measure,
    kernel: PairwiseKernel,
    T: int,
    rng: np.random.Generator,
    *,
    schedule: StepRule | None = None,
    R: float | None = None,
    eta: float | None = None,
    record_at: object = None,
    gram_cache: bool | None = None,
    track_average: bool = False,
    mc_rng: np.random.Generator | None = None,
    mc_pairs: int = constants.MC_PAIRS,
    callback: Callable[[OperaState], None] | None = None,
) -> Trajectory:
    """Run one learner for ``T`` samples drawn from *meas*.

    ``opera-*`` modes take a *schedule*; ``pogd`` takes ``R`` and ``eta``. The row
    for step ``t`` in *record_at* holds ``f_t``; *callback* sees the state after
    every update.
    """
    if T < 2:
        raise ValidationError("T must be at least 2")
    if kernel.domain_dim != meas.dim:
        raise ValidationError(
            f"kernel acts on dimension {kernel.domain_dim}, measure on {meas.dim}"
        )
    engine = _engine_mode(mode, kernel)
    steps_to_record = set(resolve_record_at(record_at, T))
    if gram_cache is None:
        gram_cache = T <= constants.GRAM_CACHE_MAX_T

    state: OperaState
    if mode == "pogd":
        if R is None or eta is None:
            raise ConfigurationError("pogd needs both R and eta")
        state = PogdState(
            kernel, R, eta, engine, gram_cache=gram_cache, track_average=track_average
        )
        rule: StepRule = ConstantStep(eta)
    else:
        if schedule is None:
            raise ConfigurationError(f"{mode} needs a step-size schedule")
        state = OperaState(
            kernel, engine, gram_cache=gram_cache, track_average=track_average
        )
        rule = schedule

    X, y = sample_many(meas, rng, T)
    target = pairwise_target(meas)
    records: list[StepRecord] = []
    if isinstance(meas, DiscreteMeasure):
        mc_rng = None
    elif mc_rng is None:
        mc_rng = np.random.default_rng(0)

    def record() -> None:
        if state.t in steps_to_record:
            snapshot = state.hypothesis()
            error = rho_norm(difference(snapshot, target), meas, mc_rng, mc_pairs)
            records.append(StepRecord(state.t, snapshot, state.norm(), error))

    record()
    state.observe(X[0], y[0])
    record()
    gammas = []
    for t in range(2, T + 1):
        if isinstance(state, PogdState):
            pogd_step(state, (X[t - 1], y[t - 1]))
        elif engine == "direct":
            opera_step(state, (X[t - 1], y[t - 1]), rule)
        else:
            opera_reduced_step(state, (X[t - 1], y[t - 1]), rule)
        gammas.append(rule.step_size(t))
        if callback is not None:
            callback(state)
        record()

    trajectory = Trajectory(mode, T, records, (X, y), steps=gammas)
    if track_average:
        averaged = state.averaged()
        trajectory.averaged = averaged
        trajectory.averaged_error = rho_norm(
            difference(averaged, target), meas, mc_rng, mc_pairs
        )
    _logger.debug("%s run finished: T=%d, %d records", mode, T, len(records))
    return trajectory
