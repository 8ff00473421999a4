"""Closed-form constants and high-probability error bounds for the last iterate.

All formulas assume ``gamma_t = t**(-theta) / mu`` with ``mu >= kappa**2``.
The rate exponent shared by the sample-error terms is
``r(theta) = min(theta - 1/2, (1 - theta) / 2)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from core.exceptions import ValidationError
from core.learner import Schedule

TWO_THIRDS = 2.0 / 3.0


def _check_theta(theta: float) -> None:
    if not 0.5 < theta < 1.0:
        raise ValidationError(f"theta must lie in (1/2, 1), got {theta}")


def _is_two_thirds(theta: float) -> bool:
    return abs(theta - TWO_THIRDS) < 1e-12


def rate_exponent(theta: float) -> float:
    return min(theta - 0.5, (1.0 - theta) / 2.0)


def c_theta(theta: float, mu: float) -> float:
    """Constant of the first-moment step-size sum."""
    _check_theta(theta)
    q = mu * (1.0 - theta)
    spread = max(1.0 / math.sqrt(q), math.sqrt(q))
    tail = math.sqrt(5.0 / (2.0 * mu))
    if _is_two_thirds(theta):
        return 20.0 * spread / q + tail
    return 26.0 * spread / (q * abs(3.0 * theta - 2.0)) + tail


def c_tilde_theta(theta: float, mu: float) -> float:
    """Constant of the second-moment step-size sum (valid for theta in (0, 1))."""
    if not 0.0 < theta < 1.0:
        raise ValidationError(f"theta must lie in (0, 1), got {theta}")
    q = mu * (1.0 - theta)
    spread = max(1.0 / q, q)
    head = 5.0 / (8.0 * mu)
    if _is_two_thirds(theta):
        return math.sqrt(head + 16.0 * spread / (mu**2 * (1.0 - theta)))
    return math.sqrt(
        head + 16.0 * spread / (mu**2 * (1.0 - theta) * abs(3.0 * theta - 2.0))
    )


def c_theta_kappa(theta: float, mu: float, kappa: float, M: float) -> float:
    return (
        4.0
        * (3.0 * c_theta(theta, mu) + 16.0 * c_tilde_theta(theta, mu) / 3.0)
        * kappa
        * (1.0 + kappa) ** 2
        * M
    )


def d_kappa_beta(theta: float, mu: float, kappa: float, beta: float) -> float:
    """Approximation-term constant with the factor ``(mu (1 - theta))**beta``."""
    return (
        ((beta / math.e) ** beta + kappa ** (2 * beta))
        * kappa ** (2 * beta)
        * (mu * (1.0 - theta)) ** beta
        * (1.0 - 0.5 ** (1.0 - theta)) ** (-beta)
    )


def d_kappa_beta_printed(
    theta: float, mu: float, kappa: float, beta: float
) -> float | None:
    """The same constant with ``(mu (1 - beta))**beta``; undefined for beta >= 1."""
    if beta >= 1.0:
        return None
    return (
        ((beta / math.e) ** beta + kappa ** (2 * beta))
        * kappa ** (2 * beta)
        * (mu * (1.0 - beta)) ** beta
        * (1.0 - 0.5 ** (1.0 - theta)) ** (-beta)
    )


@dataclass(frozen=True)
class BoundConstants:
    c_theta: float
    c_tilde_theta: float
    c_theta_kappa: float
    d_kappa_beta: float | None = None
    d_kappa_beta_printed: float | None = None

    def as_dict(self) -> dict[str, float | None]:
        return asdict(self)


def constants(
    theta: float, mu: float, kappa: float, M: float, beta: float | None = None
) -> BoundConstants:
    _check_theta(theta)
    if not (mu > 0 and kappa > 0 and M > 0):
        raise ValidationError("mu, kappa and M must be positive")
    d = d_printed = None
    if beta is not None:
        if not beta > 0:
            raise ValidationError("beta must be positive")
        d = d_kappa_beta(theta, mu, kappa, beta)
        d_printed = d_kappa_beta_printed(theta, mu, kappa, beta)
    return BoundConstants(
        c_theta=c_theta(theta, mu),
        c_tilde_theta=c_tilde_theta(theta, mu),
        c_theta_kappa=c_theta_kappa(theta, mu, kappa, M),
        d_kappa_beta=d,
        d_kappa_beta_printed=d_printed,
    )


def theorem1_s(theta: float, mu: float, kappa: float, T: int) -> float:
    """Argument of the K-functional in the last-iterate bound."""
    return math.sqrt(6.0 * mu) * (1.0 + kappa) * T ** (-(1.0 - theta) / 2.0)


def _check_T_delta(T: int, delta: float) -> None:
    if T < 4:
        raise ValidationError(f"T must be at least 4, got {T}")
    if not 0.0 < delta < 1.0:
        raise ValidationError(f"delta must lie in (0, 1), got {delta}")


def sample_error_term(
    theta: float, mu: float, kappa: float, M: float, T: int, delta: float
) -> float:
    """``C_{theta,kappa} T^{-r(theta)} log T log(8T/delta)``."""
    _check_T_delta(T, delta)
    return (
        c_theta_kappa(theta, mu, kappa, M)
        * T ** (-rate_exponent(theta))
        * math.log(T)
        * math.log(8.0 * T / delta)
    )


def theorem1_bound(
    theta: float,
    mu: float,
    kappa: float,
    M: float,
    T: int,
    delta: float,
    kfunc_value: float,
) -> float:
    """``K(s_T, f~) + C_{theta,kappa} T^{-r(theta)} log T log(8T/delta)``.

    *kfunc_value* is ``K(theorem1_s(theta, mu, kappa, T), f~)`` (or any upper
    bound of it). The bound holds with probability at least ``1 - delta``.
    """
    return kfunc_value + sample_error_term(theta, mu, kappa, M, T, delta)


def sample_term_decay_threshold(
    theta: float, mu: float, kappa: float, M: float, delta: float, T_max: int
) -> int:
    """Smallest ``T0 >= 4`` with the sample-error term nonincreasing on ``[T0, T_max]``."""
    Ts = np.arange(4, T_max + 1)
    terms = np.array([sample_error_term(theta, mu, kappa, M, int(T), delta) for T in Ts])
    rising = np.nonzero(np.diff(terms) > 0)[0]
    if len(rising) == 0:
        return 4
    return int(Ts[rising[-1] + 1])


def theorem2_theta(beta: float) -> float:
    """Step-size exponent ``min((2 beta + 1) / (2 beta + 2), 2/3)``."""
    if not beta > 0:
        raise ValidationError("beta must be positive")
    return min((2.0 * beta + 1.0) / (2.0 * beta + 2.0), TWO_THIRDS)


def theorem2_exponent(beta: float) -> float:
    """Guaranteed decay exponent ``min(beta / (2 beta + 2), 1/6)``."""
    if not beta > 0:
        raise ValidationError("beta must be positive")
    return min(beta / (2.0 * beta + 2.0), 1.0 / 6.0)


def theorem2_bound(
    theta: float,
    mu: float,
    kappa: float,
    M: float,
    T: int,
    delta: float,
    beta: float,
    source_norm: float,
) -> float:
    """``D ||L^{-beta} f~|| T^{-beta(1-theta)} + C_{theta,kappa} T^{-r} log T log(8T/delta)``."""
    return d_kappa_beta(theta, mu, kappa, beta) * source_norm * T ** (
        -beta * (1.0 - theta)
    ) + sample_error_term(theta, mu, kappa, M, T, delta)


def approximation_s(schedule: Schedule, kappa: float, t: int) -> float:
    """``sqrt(2) (1 + kappa) (sum_{j=2}^t gamma_j)^{-1/2}``."""
    return math.sqrt(2.0) * (1.0 + kappa) / math.sqrt(schedule.partial_sum(2, t))


def approximation_source_bound(
    schedule: Schedule, kappa: float, t: int, beta: float, source_norm: float
) -> float:
    """``2 ((beta/e)^beta + kappa^{2 beta}) ||L^{-beta} f~|| (sum_{j=2}^t gamma_j)^{-beta}``."""
    return (
        2.0
        * ((beta / math.e) ** beta + kappa ** (2 * beta))
        * source_norm
        * schedule.partial_sum(2, t) ** (-beta)
    )


def operator_product_bound(beta: float, kappa: float, window_sum: float) -> float:
    """``((beta/e)^beta + kappa^{2 beta}) min(1, window_sum^{-beta})``."""
    factor = (beta / math.e) ** beta + kappa ** (2 * beta)
    return factor * min(1.0, window_sum ** (-beta)) if window_sum > 0 else factor


def theorem4_bound(
    schedule: Schedule, kappa: float, M: float, t: int, delta: float
) -> float:
    """High-probability bound on the drift sum ``||sum_j gamma_j omega^t_{j+1} A^j||``."""
    from theory.lemmas import lemma7_lhs

    return (
        12.0
        * kappa
        * (1.0 + kappa) ** 2
        * M
        * math.log(4.0 * t / delta)
        * lemma7_lhs(schedule, t, variant="sqrt")
    )


def theorem5_bound(
    schedule: Schedule, kappa: float, M: float, t: int, delta: float
) -> float:
    """High-probability bound on the martingale sum ``||sum_j gamma_j omega^t_{j+1} B^j||``."""
    from theory.lemmas import lemma8_lhs

    return (
        64.0
        / 3.0
        * kappa
        * (1.0 + kappa) ** 2
        * M
        * math.log(2.0 / delta)
        * lemma8_lhs(schedule, t, variant="linear")
    )
