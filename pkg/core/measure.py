"""Data distributions, regression functions, rho-norms and pairwise risk.

Two kinds of measure are supported:

* ``DiscreteMeasure`` has finite support, so the rho-norm on X x X and the risk
  are exact finite sums. It is the measure the spectral backend works on.
* ``SamplerMeasure`` draws x uniformly from a box and uses a target from a
  small catalog; its norms are Monte Carlo estimates with a standard error.

Labels are ``y = f_rho(x) + eps`` with eps uniform on ``[-s, s]``. Sampling takes
an explicit ``numpy.random.Generator`` and consumes one row of uniforms per
sample, so a longer draw from the same seed extends a shorter one.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from core import constants
from core.exceptions import ValidationError
from core.kernels import Box, as_pairs, as_points
from core.protocols import PairwiseEvaluable

_logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UniformNoise:
    """Additive label noise, uniform on ``[-half_width, half_width]``."""

    half_width: float = 0.0

    def __post_init__(self) -> None:
        if self.half_width < 0:
            raise ValidationError("noise half width must be nonnegative")

    @property
    def variance(self) -> float:
        return self.half_width**2 / 3.0


@dataclass(frozen=True)
class Estimate:
    """A norm or risk value; ``stderr`` is None when the value is exact."""

    value: float
    stderr: float | None = None

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finite-support marginal with regression values on the support."""

    support: np.ndarray
    probs: np.ndarray
    f_rho_values: np.ndarray
    noise: UniformNoise = field(default_factory=UniformNoise)
    _index: dict[bytes, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        support = np.asarray(self.support, dtype=float)
        if support.ndim == 1:
            support = support.reshape(-1, 1)
        probs = np.asarray(self.probs, dtype=float).ravel()
        values = np.asarray(self.f_rho_values, dtype=float).ravel()
        if support.ndim != 2 or len(support) == 0:
            raise ValidationError("support must be a nonempty list of points")
        if len(probs) != len(support) or len(values) != len(support):
            raise ValidationError(
                f"support has {len(support)} points but probs has {len(probs)} "
                f"and f_rho has {len(values)} entries"
            )
        if np.any(probs <= 0):
            raise ValidationError("probs must be strictly positive")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValidationError(f"probs sum to {probs.sum():.15g}, not 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "f_rho_values", values)
        index: dict[bytes, int] = {}
        for i, row in enumerate(support + 0.0):
            key = row.tobytes()
            if key in index:
                raise ValidationError(f"support point {row.tolist()} is repeated")
            index[key] = i
        object.__setattr__(self, "_index", index)

    @property
    def m(self) -> int:
        return len(self.support)

    @property
    def dim(self) -> int:
        return self.support.shape[1]

    @property
    def M(self) -> float:
        return float(np.max(np.abs(self.f_rho_values)) + self.noise.half_width)

    def index_of(self, points: np.ndarray) -> np.ndarray:
        """Support indices of *points*; raises for points outside the support."""
        points = as_points(points, self.dim) + 0.0
        out = np.empty(len(points), dtype=int)
        for i, row in enumerate(points):
            slot = self._index.get(row.tobytes())
            if slot is None:
                raise ValidationError(f"{row.tolist()} is not a support point")
            out[i] = slot
        return out

    def f_rho(self, points: np.ndarray) -> np.ndarray:
        return self.f_rho_values[self.index_of(points)]

    def grid_pairs(self) -> np.ndarray:
        """All ``m**2`` ordered support pairs; pair ``(a, b)`` sits at ``a*m + b``."""
        m = self.m
        return np.stack(
            [np.repeat(self.support, m, axis=0), np.tile(self.support, (m, 1))], axis=1
        )

    def grid_weights(self) -> np.ndarray:
        return np.outer(self.probs, self.probs).ravel()

    def draw(self, uniforms: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        cdf = np.cumsum(self.probs)
        idx = np.minimum(np.searchsorted(cdf, uniforms[:, 0], side="right"), self.m - 1)
        eps = self.noise.half_width * (2.0 * uniforms[:, 1] - 1.0)
        return self.support[idx], self.f_rho_values[idx] + eps

    @property
    def uniforms_per_sample(self) -> int:
        return 2


def _sin_sum(x: np.ndarray) -> np.ndarray:
    return np.sum(np.sin(np.pi * x), axis=1)


def _poly2(x: np.ndarray) -> np.ndarray:
    return np.sum(x**2, axis=1)


def _step_free(x: np.ndarray) -> np.ndarray:
    return np.sum(np.tanh(2.0 * x), axis=1)


def _sin_sup(lo: float, hi: float) -> float:
    # |sin(pi x)| = 1 at half-integers
    first = np.ceil(lo - 0.5) + 0.5
    if first <= hi:
        return 1.0
    return float(max(abs(np.sin(np.pi * lo)), abs(np.sin(np.pi * hi))))


_CATALOG: dict[str, tuple[Callable[[np.ndarray], np.ndarray], Callable[[float, float], float]]] = {
    "sin-sum": (_sin_sum, _sin_sup),
    "poly2": (_poly2, lambda lo, hi: max(lo * lo, hi * hi)),
    "step-free": (
        _step_free,
        lambda lo, hi: float(max(abs(np.tanh(2 * lo)), abs(np.tanh(2 * hi)))),
    ),
}

TARGET_CATALOG: tuple[str, ...] = tuple(_CATALOG)


@dataclass(frozen=True)
class SamplerMeasure:
    """Uniform marginal on a box with a catalog regression function."""

    box: Box
    target: str
    noise: UniformNoise = field(default_factory=UniformNoise)

    def __post_init__(self) -> None:
        if self.target not in _CATALOG:
            raise ValidationError(
                f"Unknown target '{self.target}'. Available: {', '.join(TARGET_CATALOG)}"
            )

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def M(self) -> float:
        _, sup = _CATALOG[self.target]
        bound = sum(sup(lo, hi) for lo, hi in zip(self.box.lo, self.box.hi))
        return float(bound + self.noise.half_width)

    def f_rho(self, points: np.ndarray) -> np.ndarray:
        fn, _ = _CATALOG[self.target]
        return fn(as_points(points, self.dim))

    def sample_points(self, uniforms: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.box.lo)
        hi = np.asarray(self.box.hi)
        return lo + (hi - lo) * uniforms[:, : self.dim]

    def draw(self, uniforms: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = self.sample_points(uniforms)
        eps = self.noise.half_width * (2.0 * uniforms[:, self.dim] - 1.0)
        return x, self.f_rho(x) + eps

    @property
    def uniforms_per_sample(self) -> int:
        return self.dim + 1


Measure = Union[DiscreteMeasure, SamplerMeasure]


@dataclass(frozen=True)
class PairwiseTarget:
    """``f~(x, x') = f_rho(x) - f_rho(x')``."""

    measure: Measure

    def evaluate_pairs(self, pairs: np.ndarray) -> np.ndarray:
        pairs = as_pairs(pairs, self.measure.dim)
        return self.measure.f_rho(pairs[:, 0]) - self.measure.f_rho(pairs[:, 1])


def sample_many(
    meas: Measure, rng: np.random.Generator, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Draw *n* labelled samples; returns ``(x, y)`` of shapes ``(n, d)`` and ``(n,)``."""
    if n < 0:
        raise ValidationError("sample count must be nonnegative")
    uniforms = rng.random((n, meas.uniforms_per_sample))
    return meas.draw(uniforms)


def sample(meas: Measure, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    x, y = sample_many(meas, rng, 1)
    return x[0], float(y[0])


def pairwise_target(meas: Measure) -> PairwiseTarget:
    return PairwiseTarget(meas)


def _mc_pairs(
    meas: Measure, rng: np.random.Generator, n: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    if n < 2:
        raise ValidationError("Monte Carlo estimates need at least 2 pairs")
    x1, y1 = sample_many(meas, rng, n)
    x2, y2 = sample_many(meas, rng, n)
    return x1, y1, x2, y2


def rho_norm(
    f: PairwiseEvaluable,
    meas: Measure,
    rng: np.random.Generator | None = None,
    n_pairs: int = constants.MC_PAIRS,
) -> Estimate:
    """``||f||_rho`` on X x X.

    Exact double sum for discrete measures; otherwise a Monte Carlo mean over
    *n_pairs* independent pairs with a delta-method standard error.
    """
    if isinstance(meas, DiscreteMeasure):
        values = f.evaluate_pairs(meas.grid_pairs())
        return Estimate(float(np.sqrt(np.sum(meas.grid_weights() * values**2))))
    rng = rng if rng is not None else np.random.default_rng(0)
    x1, _, x2, _ = _mc_pairs(meas, rng, n_pairs)
    squares = f.evaluate_pairs(np.stack([x1, x2], axis=1)) ** 2
    mean = float(squares.mean())
    se_mean = float(squares.std(ddof=1) / np.sqrt(n_pairs))
    value = float(np.sqrt(mean))
    stderr = se_mean / (2.0 * value) if value > 0 else 0.0
    return Estimate(value, stderr)


def risk(
    f: PairwiseEvaluable,
    meas: Measure,
    rng: np.random.Generator | None = None,
    n_pairs: int = constants.MC_PAIRS,
) -> Estimate:
    """Pairwise least-squares risk ``E (f(x, x') - y + y')^2``.

    For discrete measures this is ``||f - f~||_rho^2 + 2 Var(eps)`` exactly.
    """
    if isinstance(meas, DiscreteMeasure):
        pairs = meas.grid_pairs()
        residual = f.evaluate_pairs(pairs) - pairwise_target(meas).evaluate_pairs(pairs)
        excess = float(np.sum(meas.grid_weights() * residual**2))
        return Estimate(excess + 2.0 * meas.noise.variance)
    rng = rng if rng is not None else np.random.default_rng(0)
    x1, y1, x2, y2 = _mc_pairs(meas, rng, n_pairs)
    losses = (f.evaluate_pairs(np.stack([x1, x2], axis=1)) - y1 + y2) ** 2
    return Estimate(float(losses.mean()), float(losses.std(ddof=1) / np.sqrt(n_pairs)))
