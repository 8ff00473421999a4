"""The integral operator L_K on the support grid of a discrete measure.

Grid functions are vectors indexed by ordered support pairs ``(a, b)`` at
position ``a*m + b`` with weights ``w = p_a p_b``. ``L_K h = K W h`` where
``K`` is the kernel matrix on the grid and ``W = diag(w)``. It is self-adjoint
in the weighted inner product, so it is diagonalised through the symmetric
matrix ``S = W^{1/2} K W^{1/2} = U diag(lam) U^T``:

* eigenfunctions ``phi_k = W^{-1/2} u_k`` (orthonormal in L2_rho),
* coordinates ``c = U^T W^{1/2} h``, so ``||h||_rho = ||c||``,
* ``L_K^beta h = W^{-1/2} U diag(lam^beta) c``,
* ``||h||_K^2 = sum_k c_k^2 / lam_k`` for h in the range of L_K.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from core import constants
from core.exceptions import ConfigurationError, DegenerateModelError, ValidationError
from core.kernels import PairwiseKernel
from core.measure import DiscreteMeasure
from core.protocols import PairwiseEvaluable

_logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SpectralModel:
    kernel: PairwiseKernel
    measure: DiscreteMeasure
    pairs: np.ndarray
    weights: np.ndarray
    kernel_matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)

    @property
    def null_mask(self) -> np.ndarray:
        top = float(self.eigenvalues.max(initial=0.0))
        return self.eigenvalues <= constants.SPECTRAL_NULL_TOLERANCE * top

    def grid_function(self, f: PairwiseEvaluable) -> np.ndarray:
        return np.asarray(f.evaluate_pairs(self.pairs), dtype=float)

    def coordinates(self, h: np.ndarray) -> np.ndarray:
        return self.eigenvectors.T @ (self.sqrt_weights * h)

    def from_coordinates(self, c: np.ndarray) -> np.ndarray:
        return (self.eigenvectors @ c) / self.sqrt_weights

    def apply(self, h: np.ndarray) -> np.ndarray:
        """``L_K h`` by direct weighted kernel summation."""
        return self.kernel_matrix @ (self.weights * h)

    def spectral_apply(self, h: np.ndarray) -> np.ndarray:
        """``L_K h`` through the eigendecomposition."""
        return self.from_coordinates(self.eigenvalues * self.coordinates(h))

    def operator(self, grid_weights: np.ndarray) -> np.ndarray:
        """Matrix of ``h -> K diag(grid_weights) h``; L_K itself for ``self.weights``."""
        return self.kernel_matrix * grid_weights[None, :]

    def in_rho_basis(self, op: np.ndarray) -> np.ndarray:
        """The operator expressed in an L2_rho-orthonormal basis of grid functions."""
        s = self.sqrt_weights
        return s[:, None] * op / s[None, :]

    def rho_norm(self, h: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self.weights * h * h)))

    def rkhs_norm(self, h: np.ndarray) -> float:
        """``||h||_K`` for a grid function in the range of ``L_K``."""
        c = self.coordinates(h)
        keep = ~self.null_mask
        return float(np.sqrt(np.sum(c[keep] ** 2 / self.eigenvalues[keep])))

    def inverse_power_norm(self, h: np.ndarray, beta: float) -> float:
        """``||L_K^{-beta} h||_rho`` on the non-null eigendirections."""
        c = self.coordinates(h)
        keep = ~self.null_mask
        return float(
            np.sqrt(np.sum(c[keep] ** 2 * self.eigenvalues[keep] ** (-2.0 * beta)))
        )

    def power_operator(self, beta: float) -> np.ndarray:
        """Matrix of ``L_K^beta`` acting on grid functions."""
        lam = np.where(self.null_mask, 0.0, self.eigenvalues) ** beta
        s = self.sqrt_weights
        return (self.eigenvectors * lam[None, :]) @ (self.eigenvectors.T * s[None, :]) / s[:, None]


def build_spectral_model(k: PairwiseKernel, meas: DiscreteMeasure) -> SpectralModel:
    """Diagonalise ``L_K`` on the ``m**2`` ordered support pairs of *meas*."""
    if k.domain_dim != meas.dim:
        raise ValidationError("kernel and measure act on different dimensions")
    size = meas.m**2
    if size > constants.SPECTRAL_GRID_CAP:
        raise ConfigurationError(
            f"Support grid has {size} pairs; the cap is {constants.SPECTRAL_GRID_CAP}"
        )
    pairs = meas.grid_pairs()
    weights = meas.grid_weights()
    kmat = k.matrix(pairs, pairs)
    kmat = 0.5 * (kmat + kmat.T)
    s = np.sqrt(weights)
    eigenvalues, eigenvectors = linalg.eigh(s[:, None] * kmat * s[None, :])
    top = float(eigenvalues.max(initial=0.0))
    lowest = float(eigenvalues.min(initial=0.0))
    if lowest < -constants.SPECTRAL_NULL_TOLERANCE * max(top, 0.0):
        _logger.warning("Clamping eigenvalue %.3e (largest %.3e) to 0", lowest, top)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    order = np.argsort(eigenvalues)[::-1]
    _logger.debug("Spectral model: %d grid pairs, top eigenvalue %.4g", size, top)
    return SpectralModel(
        kernel=k,
        measure=meas,
        pairs=pairs,
        weights=weights,
        kernel_matrix=kmat,
        eigenvalues=eigenvalues[order],
        eigenvectors=eigenvectors[:, order],
    )


def fractional_apply(model: SpectralModel, beta: float, g: np.ndarray) -> np.ndarray:
    """``L_K^beta g``; null eigendirections are mapped to zero."""
    if not beta > 0:
        raise ValidationError(f"beta must be positive, got {beta}")
    c = model.coordinates(np.asarray(g, dtype=float))
    lam = np.where(model.null_mask, 0.0, model.eigenvalues)
    return model.from_coordinates(lam**beta * c)


@dataclass(frozen=True)
class RegularTarget:
    """A pairwise target in the range of ``L_K^beta``."""

    values: np.ndarray
    source_norm: float
    f_rho_values: np.ndarray
    beta: float


def construct_regular_target(
    model: SpectralModel,
    beta: float,
    norm_target: float,
    rng: np.random.Generator,
) -> RegularTarget:
    """Draw ``f~ = L_K^beta g`` with ``||L_K^{-beta} f~||_rho = norm_target``.

    ``g`` is Gaussian on the non-null eigendirections. The univariate regression
    values are read off by anchoring at the first support point,
    ``f_rho(u_a) = f~(u_a, u_1)``.
    """
    if not model.kernel.is_induced:
        raise ConfigurationError("Regular targets need an induced kernel")
    if not beta > 0 or not norm_target > 0:
        raise ValidationError("beta and norm_target must be positive")
    keep = ~model.null_mask
    if not keep.any() or model.eigenvalues.max(initial=0.0) <= 0.0:
        raise DegenerateModelError("All eigenvalues of L_K vanish on this support")
    g = np.zeros(model.size)
    g[keep] = rng.standard_normal(int(keep.sum()))
    g *= norm_target / np.linalg.norm(g)
    coords = np.zeros(model.size)
    coords[keep] = model.eigenvalues[keep] ** beta * g[keep]
    values = model.from_coordinates(coords)
    m = model.measure.m
    f_rho_values = values.reshape(m, m)[:, 0].copy()
    return RegularTarget(
        values=values,
        source_norm=model.inverse_power_norm(values, beta),
        f_rho_values=f_rho_values,
        beta=beta,
    )


def regular_measure(
    model: SpectralModel,
    beta: float,
    norm_target: float,
    rng: np.random.Generator,
) -> tuple[DiscreteMeasure, RegularTarget]:
    """Copy of ``model.measure`` whose regression values realise a regular target."""
    target = construct_regular_target(model, beta, norm_target, rng)
    base = model.measure
    meas = DiscreteMeasure(base.support, base.probs, target.f_rho_values, base.noise)
    return meas, target
