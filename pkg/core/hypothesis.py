"""Hypotheses as finite kernel expansions.

An :class:`Expansion` stores raw centers and coefficients. Centers may repeat
(the direct OPERA update appends one term per past sample and steps revisit
support points of discrete measures); evaluation and norms work on a compacted
view in which coincident centers are merged, so their cost depends on the
number of distinct centers only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from core.exceptions import ValidationError
from core.kernels import (
    Kernel,
    PairwiseKernel,
    UnivariateKernel,
    as_pairs,
    as_points,
    parse_kernel_spec,
)

_logger = logging.getLogger(__name__)


def _row_keys(centers: np.ndarray) -> list[bytes]:
    flat = np.ascontiguousarray(centers.reshape(len(centers), -1) + 0.0)
    return [row.tobytes() for row in flat]


def _unique_rows(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct rows in first-occurrence order and the inverse index."""
    flat = rows.reshape(len(rows), -1) + 0.0
    _, first, inverse = np.unique(flat, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return rows[first[order]], rank[inverse]


@dataclass
class Expansion:
    """``h = sum_i coefficients[i] * k(centers[i], .)``.

    Treated as a value object: operations return new expansions.
    """

    kernel: Kernel
    centers: np.ndarray
    coefficients: np.ndarray
    cached_sq_norm: float | None = None
    _compact: tuple[np.ndarray, np.ndarray] | None = field(
        default=None, init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        self.coefficients = np.asarray(self.coefficients, dtype=float).ravel()
        empty = len(self.coefficients) == 0 and np.size(self.centers) == 0
        if self.is_pairwise:
            self.centers = (
                np.empty((0, 2, self.dim))
                if empty
                else as_pairs(self.centers, self.dim)
            )
        else:
            self.centers = (
                np.empty((0, self.dim)) if empty else as_points(self.centers, self.dim)
            )
        if len(self.centers) != len(self.coefficients):
            raise ValidationError(
                f"{len(self.centers)} centers but {len(self.coefficients)} coefficients"
            )

    @classmethod
    def empty(cls, kernel: Kernel) -> Expansion:
        return cls(kernel, np.empty((0,)), np.empty(0))

    @property
    def is_pairwise(self) -> bool:
        return isinstance(self.kernel, PairwiseKernel)

    @property
    def dim(self) -> int:
        return self.kernel.domain_dim

    def __len__(self) -> int:
        return len(self.coefficients)

    def compact(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct centers (first-occurrence order) and their summed coefficients."""
        if self._compact is None:
            if len(self) == 0:
                self._compact = (self.centers, self.coefficients)
            else:
                centers, inverse = _unique_rows(self.centers)
                coeffs = np.bincount(
                    inverse, weights=self.coefficients, minlength=len(centers)
                )
                self._compact = (centers, coeffs)
        return self._compact

    def compacted(self) -> Expansion:
        centers, coeffs = self.compact()
        return Expansion(self.kernel, centers.copy(), coeffs.copy(), self.cached_sq_norm)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Values at a stack of points (univariate) or pairs (pairwise)."""
        if self.is_pairwise:
            stack = as_pairs(points, self.dim)
        else:
            stack = as_points(points, self.dim)
        if len(self) == 0:
            return np.zeros(len(stack))
        centers, coeffs = self.compact()
        return self.kernel.matrix(stack, centers) @ coeffs  # type: ignore[arg-type]

    def evaluate_pairs(self, pairs: np.ndarray) -> np.ndarray:
        if not self.is_pairwise:
            raise ValidationError(
                "A univariate expansion is not pairwise-evaluable; lift() it first"
            )
        return self.evaluate(pairs)

    def sq_norm(self) -> float:
        if self.cached_sq_norm is not None:
            return self.cached_sq_norm
        if len(self) == 0:
            return 0.0
        centers, coeffs = self.compact()
        gram = self.kernel.matrix(centers, centers)  # type: ignore[arg-type]
        value = float(coeffs @ (0.5 * (gram + gram.T)) @ coeffs)
        if value < 0.0:
            _logger.debug("Clamping negative squared norm %.3e to 0", value)
            value = 0.0
        self.cached_sq_norm = value
        return value

    def rkhs_norm(self) -> float:
        return float(np.sqrt(self.sq_norm()))

    def scaled(self, factor: float) -> Expansion:
        sq = None if self.cached_sq_norm is None else self.cached_sq_norm * factor**2
        return Expansion(self.kernel, self.centers, self.coefficients * factor, sq)

    def __add__(self, other: Expansion) -> Expansion:
        if other.kernel != self.kernel:
            raise ValidationError("Cannot add expansions over different kernels")
        return add_scaled_terms(self, other.centers, other.coefficients)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kernel": self.kernel.spec,
            "domain_dim": self.dim,
            "centers": self.centers.tolist(),
            "coefficients": self.coefficients.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Expansion:
        try:
            kernel = parse_kernel_spec(data["kernel"], int(data.get("domain_dim", 1)))
            return cls(kernel, np.asarray(data["centers"]), data["coefficients"])
        except KeyError as exc:
            raise ValidationError(f"Expansion record lacks field {exc}") from exc


@dataclass(frozen=True)
class LiftedHypothesis:
    """``Im(g)(x1, x2) = g(x1) - g(x2)`` for a univariate expansion ``g``."""

    base: Expansion

    def evaluate_pairs(self, pairs: np.ndarray) -> np.ndarray:
        pairs = as_pairs(pairs, self.base.dim)
        n = len(pairs)
        points = pairs.reshape(2 * n, self.base.dim)
        # one value per distinct point, so Im(g)(x, x) is exactly zero
        distinct, inverse = _unique_rows(points) if n else (points, np.empty(0, int))
        values = self.base.evaluate(distinct)[inverse].reshape(n, 2)
        return values[:, 0] - values[:, 1]

    def rkhs_norm(self) -> float:
        return self.base.rkhs_norm()


@dataclass(frozen=True)
class PairwiseDifference:
    """Pointwise difference of two pairwise-evaluable functions."""

    left: Any
    right: Any

    def evaluate_pairs(self, pairs: np.ndarray) -> np.ndarray:
        return self.left.evaluate_pairs(pairs) - self.right.evaluate_pairs(pairs)


def difference(f: Any, h: Any) -> PairwiseDifference:
    return PairwiseDifference(f, h)


def evaluate(h: Expansion, p: object) -> float:
    """Value of *h* at a single point (univariate) or a single pair (pairwise)."""
    if h.is_pairwise:
        stack = as_pairs(p, h.dim)
        if len(stack) != 1:
            raise ValidationError("evaluate() takes a single pair")
    else:
        stack = np.atleast_1d(np.asarray(p, dtype=float))
        if stack.shape != (h.dim,):
            raise ValidationError(
                f"Expected a point of dimension {h.dim}, got shape {stack.shape}"
            )
        stack = stack.reshape(1, h.dim)
    return float(h.evaluate(stack)[0])


def rkhs_norm(h: Expansion) -> float:
    return h.rkhs_norm()


def add_scaled_terms(
    h: Expansion,
    new_centers: object,
    new_coeffs: object,
    merge: bool = False,
) -> Expansion:
    """Append terms to *h*.

    With ``merge`` set, a new term whose center coincides exactly with an
    existing one (or with an earlier new one) is added onto that coefficient
    instead of being appended.
    """
    coeffs = np.asarray(new_coeffs, dtype=float).ravel()
    if h.is_pairwise:
        centers = as_pairs(new_centers, h.dim) if len(coeffs) else h.centers[:0]
    else:
        centers = as_points(new_centers, h.dim) if len(coeffs) else h.centers[:0]
    if len(centers) != len(coeffs):
        raise ValidationError("new_centers and new_coeffs differ in length")
    if not merge:
        return Expansion(
            h.kernel,
            np.concatenate([h.centers, centers]),
            np.concatenate([h.coefficients, coeffs]),
        )

    merged_coeffs = list(h.coefficients)
    merged_centers = list(h.centers)
    index: dict[bytes, int] = {}
    for i, key in enumerate(_row_keys(h.centers)):
        index.setdefault(key, i)
    for key, center, c in zip(_row_keys(centers), centers, coeffs):
        slot = index.get(key)
        if slot is None:
            index[key] = len(merged_coeffs)
            merged_centers.append(center)
            merged_coeffs.append(float(c))
        else:
            merged_coeffs[slot] += float(c)
    empty_shape = h.centers.shape[1:]
    stacked = (
        np.stack(merged_centers) if merged_centers else np.empty((0, *empty_shape))
    )
    return Expansion(h.kernel, stacked, np.asarray(merged_coeffs))


def project_ball(h: Expansion, R: float) -> Expansion:
    """Project *h* onto the closed RKHS ball of radius *R*.

    Inside the ball *h* is returned unchanged; outside, the coefficients are
    scaled by ``R / ||h||`` and the new squared norm is recorded as ``R**2``.
    """
    if R < 0:
        raise ValidationError("Projection radius must be nonnegative")
    if R == 0:
        return Expansion(h.kernel, h.centers, np.zeros_like(h.coefficients), 0.0)
    norm = h.rkhs_norm()
    if norm <= R:
        return h
    projected = Expansion(h.kernel, h.centers, h.coefficients * (R / norm))
    projected.cached_sq_norm = R * R
    return projected


def lift(g: Expansion) -> LiftedHypothesis:
    if g.is_pairwise:
        raise ValidationError("lift() expects a univariate expansion")
    return LiftedHypothesis(g)


def induced_expansion(g: Expansion) -> Expansion:
    """Rewrite a zero-sum univariate expansion as a pairwise expansion.

    ``sum_i c_i G_{x_i}`` with ``sum_i c_i = 0`` equals
    ``sum_i c_i (G_{x_i} - G_{x_0})``, whose lift is ``sum_i c_i K_{(x_i, x_0)}``
    under the induced kernel.
    """
    if g.is_pairwise or not isinstance(g.kernel, UnivariateKernel):
        raise ValidationError("induced_expansion() expects a univariate expansion")
    pairwise = PairwiseKernel("induced", base=g.kernel)
    if len(g) == 0:
        return Expansion.empty(pairwise)
    total = float(np.sum(g.coefficients))
    scale = float(np.sum(np.abs(g.coefficients)))
    if abs(total) > 1e-9 * max(scale, 1.0):
        raise ValidationError(
            f"Expansion is not a combination of differences (coefficient sum {total:.3e})"
        )
    anchor = np.broadcast_to(g.centers[0], g.centers.shape)
    pairs = np.stack([g.centers, anchor], axis=1)
    return Expansion(pairwise, pairs, g.coefficients.copy())


def isometry_check(g: Expansion) -> tuple[float, float]:
    """Return ``(||g||_G, ||Im(g)||_K)`` from independent Gram assemblies."""
    norm_g = Expansion(g.kernel, g.centers, g.coefficients).rkhs_norm()
    norm_k = induced_expansion(g).rkhs_norm()
    return norm_g, norm_k
