"""Numerical checks of the step-size sum inequalities and the operator-power bound.

Both printed numerators are evaluated for each sum inequality. The first-moment
sum appears as ``1 + sum gamma`` in its statement and as
``1 + (sum gamma)^{1/2}`` where the drift bound uses it; the second-moment sum
appears as ``1 + (sum gamma)^2`` in its statement and as ``1 + sum gamma`` where
the martingale bound uses it. Reports gate on the forms the error bounds rely
on and list the statement forms under ``details``.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable

import numpy as np

from core.exceptions import ValidationError
from core.learner import Schedule, StepRule
from theory import bounds
from theory.report import VerificationReport

_logger = logging.getLogger(__name__)

LEMMA7_VARIANTS = ("sqrt", "linear")
LEMMA8_VARIANTS = ("linear", "square")
RELATIVE_SLACK = 1e-12


def _gammas(schedule: StepRule, t: int) -> np.ndarray:
    """``gamma_0 .. gamma_t`` with a zero placeholder at index 0."""
    out = np.zeros(t + 1)
    if isinstance(schedule, Schedule):
        ell = np.arange(1, t + 1, dtype=float)
        out[1:] = ell ** (-schedule.theta) / schedule.mu
    else:
        out[1:] = [schedule.step_size(j) for j in range(1, t + 1)]
    return out


def _window_sums(gam: np.ndarray, t: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """For ``j = 2..t``: ``gamma_j``, ``sum_{l=2}^{j-1} gamma_l`` and ``sum_{l=j+1}^{t} gamma_l``."""
    prefix = np.cumsum(gam[: t + 1])
    j = np.arange(2, t + 1)
    head = prefix[j - 1] - prefix[1]
    tail = prefix[t] - prefix[j]
    return gam[j], head, tail


def lemma7_lhs(schedule: StepRule, t: int, variant: str = "sqrt") -> float:
    """``sum_{j=2}^t gamma_j (1 + H_j) / (sqrt(j) (1 + sum_{l=j+1}^t gamma_l)^{1/2})``.

    ``H_j`` is ``(sum_{l=2}^{j-1} gamma_l)^{1/2}`` for ``variant="sqrt"`` and the
    plain sum for ``variant="linear"``.
    """
    if variant not in LEMMA7_VARIANTS:
        raise ValidationError(f"Unknown variant {variant!r}")
    if t < 2:
        return 0.0
    g, head, tail = _window_sums(_gammas(schedule, t), t)
    numer = 1.0 + (np.sqrt(head) if variant == "sqrt" else head)
    j = np.arange(2, t + 1, dtype=float)
    return float(np.sum(g * numer / (np.sqrt(j) * np.sqrt(1.0 + tail))))


def lemma8_lhs(schedule: StepRule, t: int, variant: str = "linear") -> float:
    """``(sum_{j=2}^t gamma_j^2 (1 + H_j) / (1 + sum_{l=j+1}^t gamma_l))^{1/2}``.

    ``H_j`` is ``sum_{l=2}^{j-1} gamma_l`` for ``variant="linear"`` and its square
    for ``variant="square"``.
    """
    if variant not in LEMMA8_VARIANTS:
        raise ValidationError(f"Unknown variant {variant!r}")
    if t < 2:
        return 0.0
    g, head, tail = _window_sums(_gammas(schedule, t), t)
    numer = 1.0 + (head if variant == "linear" else head**2)
    return float(np.sqrt(np.sum(g**2 * numer / (1.0 + tail))))


def _lemma_rhs(constant: float, theta: float, t: int) -> float:
    return constant * t ** (-bounds.rate_exponent(theta)) * math.log(t)


def _lemma9_grid(t_max: int) -> np.ndarray:
    return np.unique(np.geomspace(1, t_max, 24).astype(int))


def lemma9_check(theta: float, mu: float, t_max: int) -> VerificationReport:
    """``(k+1)^{1-theta} - j^{1-theta} <= mu (1-theta) sum_{l=j}^k gamma_l <= k^{1-theta} - (j-1)^{1-theta}``."""
    report = VerificationReport("lemma9", {"theta": theta, "mu": mu, "t_max": t_max})
    schedule = Schedule(theta, mu)
    gam = _gammas(schedule, t_max)
    prefix = np.cumsum(gam)
    grid = _lemma9_grid(t_max)
    q = 1.0 - theta
    for j in grid:
        for k in grid[grid >= j]:
            middle = mu * q * (prefix[k] - prefix[j - 1])
            lower = (k + 1) ** q - j**q
            upper = k**q - (j - 1) ** q
            slack = RELATIVE_SLACK * max(abs(middle), 1.0)
            report.record(lower, middle + slack, side="lower", j=int(j), k=int(k))
            report.record(middle, upper + slack, side="upper", j=int(j), k=int(k))
    return report.finish()


def lemma_sum_checks(
    theta: float,
    mu: float,
    t_max: int,
    t_values: Iterable[int] | None = None,
) -> VerificationReport:
    """Both step-size sum inequalities for every ``t`` in ``[4, t_max]`` plus the sandwich.

    Violations of the statement-form numerators are counted per variant in
    ``details`` without failing the report.
    """
    bounds._check_theta(theta)
    if t_max < 4:
        raise ValidationError(f"t_max must be at least 4, got {t_max}")
    schedule = Schedule(theta, mu)
    c7 = bounds.c_theta(theta, mu)
    c8 = bounds.c_tilde_theta(theta, mu)
    ts = range(4, t_max + 1) if t_values is None else sorted(set(t_values))
    report = VerificationReport(
        "lemma-sums",
        {"theta": theta, "mu": mu, "t_max": t_max, "c_theta": c7, "c_tilde_theta": c8},
    )
    statement = {"lemma7:linear": 0, "lemma8:square": 0}
    worst = {key: math.inf for key in ("lemma7:sqrt", "lemma8:linear", *statement)}

    for t in ts:
        rhs7 = _lemma_rhs(c7, theta, t)
        rhs8 = _lemma_rhs(c8, theta, t)
        lhs7 = lemma7_lhs(schedule, t, "sqrt")
        lhs8 = lemma8_lhs(schedule, t, "linear")
        report.record(lhs7, rhs7, lemma="lemma7", variant="sqrt", theta=theta, t=t)
        report.record(lhs8, rhs8, lemma="lemma8", variant="linear", theta=theta, t=t)
        worst["lemma7:sqrt"] = min(worst["lemma7:sqrt"], rhs7 - lhs7)
        worst["lemma8:linear"] = min(worst["lemma8:linear"], rhs8 - lhs8)

        margin7 = rhs7 - lemma7_lhs(schedule, t, "linear")
        margin8 = rhs8 - lemma8_lhs(schedule, t, "square")
        statement["lemma7:linear"] += int(margin7 < 0)
        statement["lemma8:square"] += int(margin8 < 0)
        worst["lemma7:linear"] = min(worst["lemma7:linear"], margin7)
        worst["lemma8:square"] = min(worst["lemma8:square"], margin8)

    report.merge(lemma9_check(theta, mu, t_max))
    report.details = {
        "branch": "two-thirds" if bounds._is_two_thirds(theta) else "general",
        "statement_variant_violations": statement,
        "worst_margin_by_variant": worst,
    }
    _logger.info(
        "Sum inequalities at theta=%.4g mu=%.4g: %d cases, %d violations",
        theta,
        mu,
        report.n_cases,
        report.n_violations,
    )
    return report.finish()


def _random_psd(dim: int, top: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    eig = rng.uniform(0.0, top, size=dim)
    eig[rng.integers(dim)] = top
    return q, eig


def product_norm(gammas: np.ndarray, eigenvalues: np.ndarray, beta: float) -> float:
    """``||prod_l (I - gamma_l A) A^beta||`` for symmetric ``A`` with the given spectrum."""
    factors = np.prod(1.0 - np.outer(gammas, eigenvalues), axis=0)
    return float(np.max(np.abs(factors) * eigenvalues**beta))


def operator_product_norm_check(
    beta: float,
    theta: float,
    mu: float,
    dim: int,
    trials: int,
    rng: np.random.Generator,
    windows: int = 20,
    t_max: int = 200,
) -> VerificationReport:
    """``||prod_{l=j}^t (I - gamma_l A) A^beta|| <= ((beta/e)^beta + kappa^{2 beta}) min(1, (sum gamma)^{-beta})``.

    ``A`` is a random PSD matrix with ``||A|| = kappa^2 = mu`` so that
    ``gamma_l kappa^2 <= 1``. The first window of every trial is also evaluated
    with explicit matrix products as a cross-check of the spectral formula.
    """
    if dim > 50 or dim < 1:
        raise ValidationError(f"dim must lie in [1, 50], got {dim}")
    if not beta > 0:
        raise ValidationError("beta must be positive")
    schedule = Schedule(theta, mu)
    gam = _gammas(schedule, t_max)
    kappa = math.sqrt(mu)
    report = VerificationReport(
        "operator-product",
        {"beta": beta, "theta": theta, "mu": mu, "dim": dim, "trials": trials, "windows": windows},
    )
    max_gap = 0.0
    for trial in range(trials):
        q, eig = _random_psd(dim, mu, rng)
        for w in range(windows):
            j = int(rng.integers(1, t_max + 1))
            t = int(rng.integers(j, t_max + 1))
            window = gam[j : t + 1]
            observed = product_norm(window, eig, beta)
            if w == 0:
                explicit = np.diag(eig**beta)
                for g in window:
                    explicit = (np.eye(dim) - g * np.diag(eig)) @ explicit
                explicit = q @ explicit @ q.T
                max_gap = max(max_gap, abs(float(np.linalg.norm(explicit, 2)) - observed))
            allowed = bounds.operator_product_bound(beta, kappa, float(window.sum()))
            report.record(observed, allowed * (1 + RELATIVE_SLACK), trial=trial, j=j, t=t)
    report.details = {"spectral_vs_explicit_max_gap": max_gap}
    return report.finish()
