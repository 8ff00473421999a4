"""Exact K-functional ``K(s, f~) = inf_f ||f - f~||_rho + s ||f||_K`` on the grid.

In eigencoordinates the problem reads

    min_b  sqrt(sum_k (b_k - a_k)^2 + r0) + s sqrt(sum_k b_k^2 / lam_k)

where ``a`` are the coordinates of ``f~`` on non-null eigendirections and ``r0``
the squared mass on the null space. Any minimiser other than ``b = 0`` or
``b = a`` is a Tikhonov solution ``b_k = a_k lam_k / (lam_k + tau)`` whose
``tau`` solves ``tau N(tau) = s Res(tau)``; the solver evaluates that root
together with both endpoints and keeps the smallest value.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from core import constants
from core.exceptions import ValidationError
from core.kernels import UnivariateKernel
from core.measure import DiscreteMeasure
from theory.spectral import SpectralModel

_logger = logging.getLogger(__name__)

ROOT_TOLERANCE = 1e-10


@dataclass(frozen=True)
class KFunctionalResult:
    value: float
    tau: float
    candidate: str


class _Path:
    def __init__(self, lam: np.ndarray, a: np.ndarray, r0: float) -> None:
        self.lam = lam
        self.a = a
        self.r0 = max(float(r0), 0.0)

    def residual(self, tau: float) -> float:
        ratio = tau / (self.lam + tau)
        return float(np.sqrt(np.sum((self.a * ratio) ** 2) + self.r0))

    def norm(self, tau: float) -> float:
        return float(np.sqrt(np.sum(self.lam * self.a**2 / (self.lam + tau) ** 2)))

    def objective(self, tau: float, s: float) -> float:
        return self.residual(tau) + s * self.norm(tau)

    def stationarity(self, tau: float, s: float) -> float:
        return tau * self.norm(tau) - s * self.residual(tau)


def solve_k_functional(
    eigenvalues: np.ndarray,
    coordinates: np.ndarray,
    null_mass: float,
    s: float,
) -> KFunctionalResult:
    """Minimise over the Tikhonov path for a diagonal problem."""
    if not s > 0:
        raise ValidationError(f"s must be positive, got {s}")
    lam = np.asarray(eigenvalues, dtype=float)
    a = np.asarray(coordinates, dtype=float)
    keep = lam > 0
    path = _Path(lam[keep], a[keep], null_mass + float(np.sum(a[~keep] ** 2)))
    total = float(np.sqrt(np.sum(path.a**2) + path.r0))
    candidates = [KFunctionalResult(total, np.inf, "zero")]
    if len(path.lam) == 0:
        return candidates[0]
    candidates.append(KFunctionalResult(path.objective(0.0, s), 0.0, "interpolant"))

    lo = float(path.lam.min()) * 1e-12
    hi = float(path.lam.max()) * 1e12
    taus = np.geomspace(lo, hi, 400)
    signs = np.array([path.stationarity(t, s) for t in taus])
    for i in np.nonzero(np.sign(signs[:-1]) * np.sign(signs[1:]) < 0)[0]:
        tau = optimize.brentq(
            path.stationarity, taus[i], taus[i + 1], args=(s,), xtol=ROOT_TOLERANCE * taus[i]
        )
        candidates.append(KFunctionalResult(path.objective(tau, s), tau, "stationary"))
    best = min(candidates, key=lambda c: c.value)
    _logger.debug("K(%.3g) = %.6g via %s", s, best.value, best.candidate)
    return best


def golden_k_functional(
    eigenvalues: np.ndarray, coordinates: np.ndarray, null_mass: float, s: float
) -> float:
    """Independent estimate by bounded scalar search over ``log tau``."""
    lam = np.asarray(eigenvalues, dtype=float)
    a = np.asarray(coordinates, dtype=float)
    keep = lam > 0
    path = _Path(lam[keep], a[keep], null_mass + float(np.sum(a[~keep] ** 2)))
    total = float(np.sqrt(np.sum(path.a**2) + path.r0))
    if len(path.lam) == 0:
        return total
    lo = np.log(float(path.lam.min()) * 1e-12)
    hi = np.log(float(path.lam.max()) * 1e12)
    result = optimize.minimize_scalar(
        lambda u: path.objective(float(np.exp(u)), s),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12, "maxiter": 2000},
    )
    return float(min(result.fun, total, path.objective(0.0, s)))


def _split(model: SpectralModel, target: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    c = model.coordinates(np.asarray(target, dtype=float))
    keep = ~model.null_mask
    return model.eigenvalues[keep], c[keep], float(np.sum(c[~keep] ** 2))


def k_functional(model: SpectralModel, target: np.ndarray, s: float) -> float:
    """``K(s, f~)`` for a grid function *target*."""
    lam, a, r0 = _split(model, target)
    return solve_k_functional(lam, a, r0, s).value


def k_functional_cross_check(model: SpectralModel, target: np.ndarray, s: float) -> float:
    lam, a, r0 = _split(model, target)
    return golden_k_functional(lam, a, r0, s)


def k_functional_limit(model: SpectralModel, target: np.ndarray) -> float:
    """``lim_{s -> 0+} K(s, f~)``: the rho-distance from f~ to the closure of H_K."""
    _, _, r0 = _split(model, target)
    return float(np.sqrt(r0))


def zero_is_optimal_threshold(model: SpectralModel, target: np.ndarray) -> float:
    """Smallest ``s`` at which ``f = 0`` attains the infimum."""
    lam, a, r0 = _split(model, target)
    total = float(np.sqrt(np.sum(a**2) + r0))
    if total == 0:
        return 0.0
    return float(np.sqrt(np.sum(lam * a**2)) / total)


def reduced_k_functional(
    base: UnivariateKernel,
    meas: DiscreteMeasure,
    target: np.ndarray,
    s: float,
) -> float:
    """``inf_g ||Im(g) - f~||_rho + s ||g||_G`` over g in H_G.

    Only the values of g on the support matter, and the minimum-norm g with
    given values ``v = V Sigma^{1/2} z`` has ``||g||_G = ||z||``, where
    ``V Sigma V^T`` is the support Gram of G. The problem becomes
    ``min_z ||Phi z - y|| + s ||z||`` with ``Phi = W^{1/2} D V Sigma^{1/2}`` and
    ``y = W^{1/2} f~``; an SVD of ``Phi`` makes it diagonal.
    """
    if not s > 0:
        raise ValidationError(f"s must be positive, got {s}")
    m = meas.m
    gram = base.matrix(meas.support, meas.support)
    sigma, vectors = linalg.eigh(0.5 * (gram + gram.T))
    keep = sigma > 1e-14 * max(float(sigma.max(initial=0.0)), 0.0)
    factor = vectors[:, keep] * np.sqrt(sigma[keep])[None, :]
    diff = np.zeros((m * m, m))
    rows = np.arange(m * m)
    diff[rows, rows // m] += 1.0
    diff[rows, rows % m] -= 1.0
    sqrt_w = np.sqrt(meas.grid_weights())
    phi = sqrt_w[:, None] * (diff @ factor)
    y = sqrt_w * np.asarray(target, dtype=float)
    if phi.shape[1] == 0:
        return float(np.linalg.norm(y))
    left, singular, _ = linalg.svd(phi, full_matrices=False)
    lam = singular**2
    nonzero = lam > constants.SPECTRAL_NULL_TOLERANCE * float(lam.max(initial=0.0))
    a = left[:, nonzero].T @ y
    r0 = max(float(y @ y - a @ a), 0.0)
    return solve_k_functional(lam[nonzero], a, r0, s).value
