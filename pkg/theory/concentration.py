"""Monte Carlo coverage of the Hilbert-space Bennett and Pinelis-Bernstein inequalities."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from core.exceptions import ValidationError
from theory.report import VerificationReport

_logger = logging.getLogger(__name__)

KINDS = ("bennett", "pinelis")
BENNETT_DISTRIBUTIONS = ("constant", "rademacher", "sphere", "ball")
PINELIS_DISTRIBUTIONS = ("rademacher", "sphere", "scaled-sphere")
CHUNK = 2000


def bennett_bound(B: float, sigma: float, t: int, delta: float) -> float:
    """``2 B log(2/delta) / t + sigma sqrt(log(2/delta) / t)``."""
    log_term = math.log(2.0 / delta)
    return 2.0 * B * log_term / t + sigma * math.sqrt(log_term / t)


def pinelis_bound(B: float, sigma_t: float, delta: float) -> float:
    """``2 (B/3 + sigma_t) log(2/delta)``."""
    return 2.0 * (B / 3.0 + sigma_t) * math.log(2.0 / delta)


def coverage_tolerance(delta: float, n_trials: int) -> float:
    return delta + 3.0 * math.sqrt(delta * (1.0 - delta) / n_trials)


@dataclass
class CoverageResult:
    kind: str
    distribution: str
    t: int
    delta: float
    n_trials: int
    bound: float
    n_exceeded: int
    parameters: dict[str, Any] = field(default_factory=dict)

    @property
    def frequency(self) -> float:
        return self.n_exceeded / self.n_trials

    @property
    def tolerance(self) -> float:
        return coverage_tolerance(self.delta, self.n_trials)

    @property
    def passed(self) -> bool:
        return self.frequency <= self.tolerance

    def report(self) -> VerificationReport:
        report = VerificationReport(
            f"concentration-{self.kind}",
            {
                "distribution": self.distribution,
                "t": self.t,
                "delta": self.delta,
                "n_trials": self.n_trials,
                **self.parameters,
            },
        )
        report.record(self.frequency, self.tolerance, distribution=self.distribution)
        report.details = {"bound": self.bound, "frequency": self.frequency}
        return report.finish()


def _sphere(rng: np.random.Generator, shape: tuple[int, ...], dim: int) -> np.ndarray:
    z = rng.standard_normal((*shape, dim))
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def _bennett_draws(
    dist: str, rng: np.random.Generator, n: int, t: int, dim: int
) -> tuple[np.ndarray, np.ndarray]:
    """Samples of shape ``(n, t, dim)`` and their common mean."""
    mean = np.zeros(dim)
    if dist == "constant":
        mean[0] = 1.0
        return np.broadcast_to(mean, (n, t, dim)), mean
    if dist == "rademacher":
        xi = np.zeros((n, t, dim))
        xi[..., 0] = rng.choice((-1.0, 1.0), size=(n, t))
        return xi, mean
    if dist == "sphere":
        return _sphere(rng, (n, t), dim), mean
    # uniform in the unit ball
    radius = rng.random((n, t, 1)) ** (1.0 / dim)
    return radius * _sphere(rng, (n, t), dim), mean


def _bennett_sigma(dist: str, dim: int) -> float:
    return math.sqrt(dim / (dim + 2.0)) if dist == "ball" else 1.0


def _pinelis_sup(dist: str, rng: np.random.Generator, n: int, t: int, dim: int) -> np.ndarray:
    """``sup_j ||sum_{k<=j} S_k||`` for *n* independent martingales."""
    if dist == "rademacher":
        # S_k = eps_k v with a fixed unit vector v, so ||sum S_k|| = |sum eps_k|
        signs = rng.choice((-1.0, 1.0), size=(n, t))
        return np.max(np.abs(np.cumsum(signs, axis=1)), axis=1)
    if dist == "sphere":
        partial = np.cumsum(_sphere(rng, (n, t), dim), axis=1)
        return np.max(np.linalg.norm(partial, axis=-1), axis=1)
    # predictable scale: S_k = u_k / (1 + ||sum_{i<k} S_i||), u_k uniform on the sphere
    running = np.zeros((n, dim))
    sup = np.zeros(n)
    for _ in range(t):
        scale = 1.0 / (1.0 + np.linalg.norm(running, axis=1))
        running += scale[:, None] * _sphere(rng, (n,), dim)
        sup = np.maximum(sup, np.linalg.norm(running, axis=1))
    return sup


def concentration_coverage(
    kind: str,
    dist_spec: str,
    t: int,
    delta: float,
    n_trials: int,
    rng: np.random.Generator,
    dim: int = 5,
) -> CoverageResult:
    """Fraction of *n_trials* replications where the deviation exceeds the inequality's bound.

    ``bennett`` draws ``t`` i.i.d. vectors with ``||xi|| <= 1`` and measures
    ``||mean - E xi||``. ``pinelis`` builds a martingale difference sequence with
    ``||S_k|| <= 1`` and conditional second moments at most one, and measures
    ``sup_j ||sum_{k<=j} S_k||`` against ``sigma_t = sqrt(t)``.
    """
    if kind not in KINDS:
        raise ValidationError(f"Unknown inequality {kind!r}; expected one of {KINDS}")
    allowed = BENNETT_DISTRIBUTIONS if kind == "bennett" else PINELIS_DISTRIBUTIONS
    if dist_spec not in allowed:
        raise ValidationError(f"Unknown distribution {dist_spec!r} for {kind}")
    if t < 1 or n_trials < 1 or dim < 1:
        raise ValidationError("t, n_trials and dim must be positive")
    if not 0.0 < delta < 1.0:
        raise ValidationError(f"delta must lie in (0, 1), got {delta}")

    if kind == "bennett":
        sigma = _bennett_sigma(dist_spec, dim)
        bound = bennett_bound(1.0, sigma, t, delta)
        params = {"B": 1.0, "sigma": sigma, "dim": dim}
    else:
        bound = pinelis_bound(1.0, math.sqrt(t), delta)
        params = {"B": 1.0, "sigma_t": math.sqrt(t), "dim": dim}

    exceeded = 0
    for start in range(0, n_trials, CHUNK):
        n = min(CHUNK, n_trials - start)
        if kind == "bennett":
            xi, mean = _bennett_draws(dist_spec, rng, n, t, dim)
            deviation = np.linalg.norm(xi.mean(axis=1) - mean, axis=1)
        else:
            deviation = _pinelis_sup(dist_spec, rng, n, t, dim)
        exceeded += int(np.count_nonzero(deviation > bound))

    result = CoverageResult(kind, dist_spec, t, delta, n_trials, bound, exceeded, params)
    _logger.info(
        "%s/%s: %d of %d trials exceeded %.4g",
        kind,
        dist_spec,
        exceeded,
        n_trials,
        bound,
    )
    return result
