"""Mercer kernels on X and on X x X.

Points are handled as float arrays of shape ``(n, d)`` and ordered pairs of
points as arrays of shape ``(n, 2, d)``. Univariate kernels cover the four
supported families; pairwise kernels are either induced by a univariate kernel

    K((x1, x2), (u1, u2)) = G(x1, u1) + G(x2, u2) - G(x1, u2) - G(x2, u1)

or a Gaussian/Laplace kernel applied directly to the concatenated pair.

The induced kernel is evaluated as ``(G(x1, u1) - G(x2, u1)) - (G(x1, u2) - G(x2, u2))``.
That grouping is algebraically the same four-term sum, but it vanishes exactly on
equal pairs and flips sign exactly when a pair is swapped.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.spatial.distance import cdist

from core import constants
from core.exceptions import ValidationError

_logger = logging.getLogger(__name__)

UNIVARIATE_FAMILIES = ("gaussian", "laplace", "linear", "poly")
PAIRWISE_SOURCES = ("induced", "pair-gaussian", "pair-laplace")


def as_points(points: object, dim: int) -> np.ndarray:
    """Coerce *points* to a float array of shape ``(n, dim)``.

    A 1-d array is accepted as a list of scalars when ``dim == 1``.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1 and dim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValidationError(
            f"Expected points of shape (n, {dim}), got {tuple(arr.shape)}"
        )
    return arr


def as_point(point: object, dim: int) -> np.ndarray:
    """Coerce a single point to shape ``(1, dim)``."""
    arr = np.atleast_1d(np.asarray(point, dtype=float))
    if arr.shape != (dim,):
        raise ValidationError(
            f"Expected a point of dimension {dim}, got shape {tuple(arr.shape)}"
        )
    return arr.reshape(1, dim)


def as_pairs(pairs: object, dim: int) -> np.ndarray:
    """Coerce *pairs* to a float array of shape ``(n, 2, dim)``."""
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim == 1 and dim == 1 and arr.shape == (2,):
        arr = arr.reshape(1, 2, 1)
    elif arr.ndim == 2 and dim == 1 and arr.shape[1] == 2:
        arr = arr.reshape(-1, 2, 1)
    elif arr.ndim == 2 and arr.shape == (2, dim):
        arr = arr.reshape(1, 2, dim)
    if arr.ndim != 3 or arr.shape[1:] != (2, dim):
        raise ValidationError(
            f"Expected pairs of shape (n, 2, {dim}), got {tuple(arr.shape)}"
        )
    return arr


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lo_1, hi_1] x ... x [lo_d, hi_d]``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lo) == 0 or len(self.lo) != len(self.hi):
            raise ValidationError("Box bounds must be nonempty and of equal length")
        if any(h < lo for lo, h in zip(self.lo, self.hi)):
            raise ValidationError(f"Empty box: lo={self.lo}, hi={self.hi}")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    def grid(self, per_axis: int) -> np.ndarray:
        """Regular lattice with *per_axis* points per coordinate, endpoints included."""
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class UnivariateKernel:
    """Kernel G on X (gaussian, laplace, linear-homogeneous or polynomial)."""

    family: str
    domain_dim: int = 1
    sigma: float = 1.0
    degree: int = 2
    offset: float = 0.0

    def __post_init__(self) -> None:
        if self.family not in UNIVARIATE_FAMILIES:
            raise ValidationError(f"Unknown kernel family: {self.family}")
        if self.domain_dim < 1:
            raise ValidationError("domain_dim must be a positive integer")
        if self.family in ("gaussian", "laplace") and not self.sigma > 0:
            raise ValidationError(f"{self.family} kernel needs sigma > 0")
        if self.family == "poly" and (self.degree < 1 or self.offset < 0):
            raise ValidationError("poly kernel needs degree >= 1 and offset >= 0")

    @property
    def spec(self) -> str:
        if self.family in ("gaussian", "laplace"):
            return f"{self.family}:{self.sigma:g}"
        if self.family == "poly":
            return f"poly:{self.degree}:{self.offset:g}"
        return "linear"

    def matrix(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Kernel matrix ``G(X_i, Y_j)`` for point stacks of shape ``(n, d)``."""
        X = as_points(X, self.domain_dim)
        Y = as_points(Y, self.domain_dim)
        if self.family == "gaussian":
            return np.exp(-cdist(X, Y, "sqeuclidean") / self.sigma)
        if self.family == "laplace":
            return np.exp(-cdist(X, Y, "euclidean") / self.sigma)
        inner = X @ Y.T
        if self.family == "linear":
            return inner
        return (inner + self.offset) ** self.degree

    def paired(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Row-wise values ``G(X_i, Y_i)``."""
        X = as_points(X, self.domain_dim)
        Y = as_points(Y, self.domain_dim)
        if X.shape != Y.shape:
            raise ValidationError("paired evaluation needs equally many points")
        if self.family == "gaussian":
            return np.exp(-np.sum((X - Y) ** 2, axis=1) / self.sigma)
        if self.family == "laplace":
            return np.exp(-np.sqrt(np.sum((X - Y) ** 2, axis=1)) / self.sigma)
        inner = np.sum(X * Y, axis=1)
        if self.family == "linear":
            return inner
        return (inner + self.offset) ** self.degree


@dataclass(frozen=True)
class PairwiseKernel:
    """Kernel K on X x X.

    ``source="induced"`` builds K from ``base`` by the four-term expansion;
    ``pair-gaussian`` and ``pair-laplace`` treat a pair as one point of R^{2d}.
    """

    source: str
    base: UnivariateKernel | None = None
    sigma: float = 1.0
    domain_dim: int = field(default=0)

    def __post_init__(self) -> None:
        if self.source not in PAIRWISE_SOURCES:
            raise ValidationError(f"Unknown pairwise kernel source: {self.source}")
        if self.source == "induced":
            if self.base is None:
                raise ValidationError("induced kernel needs a base kernel")
            if self.domain_dim not in (0, self.base.domain_dim):
                raise ValidationError("domain_dim disagrees with the base kernel")
            object.__setattr__(self, "domain_dim", self.base.domain_dim)
        else:
            if not self.sigma > 0:
                raise ValidationError(f"{self.source} kernel needs sigma > 0")
            if self.domain_dim < 1:
                object.__setattr__(self, "domain_dim", 1)

    @property
    def is_induced(self) -> bool:
        return self.source == "induced"

    @property
    def spec(self) -> str:
        if self.base is not None:
            return f"induced({self.base.spec})"
        return f"{self.source}:{self.sigma:g}"

    def matrix(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        """Kernel matrix ``K(P_i, Q_j)`` for pair stacks of shape ``(n, 2, d)``."""
        P = as_pairs(P, self.domain_dim)
        Q = as_pairs(Q, self.domain_dim)
        if self.base is not None:
            G = self.base.matrix
            left = G(P[:, 0], Q[:, 0]) - G(P[:, 1], Q[:, 0])
            right = G(P[:, 0], Q[:, 1]) - G(P[:, 1], Q[:, 1])
            return left - right
        flat_p = P.reshape(len(P), -1)
        flat_q = Q.reshape(len(Q), -1)
        if self.source == "pair-gaussian":
            return np.exp(-cdist(flat_p, flat_q, "sqeuclidean") / self.sigma)
        return np.exp(-cdist(flat_p, flat_q, "euclidean") / self.sigma)

    def diagonal(self, P: np.ndarray) -> np.ndarray:
        """Values ``K(P_i, P_i)`` without forming the full matrix."""
        P = as_pairs(P, self.domain_dim)
        if self.base is not None:
            G = self.base.paired
            x1, x2 = P[:, 0], P[:, 1]
            return (G(x1, x1) - G(x2, x1)) - (G(x1, x2) - G(x2, x2))
        return np.ones(len(P))


Kernel = Union[UnivariateKernel, PairwiseKernel]


@dataclass(frozen=True)
class KappaBound:
    """Upper bound on ``sup sqrt(K(p, p))`` over pairs of domain points."""

    value: float
    provenance: str
    n_points: int | None = None


_SPEC_RE = re.compile(r"^\s*induced\((?P<inner>.*)\)\s*$")


def parse_univariate_spec(spec: str, domain_dim: int = 1) -> UnivariateKernel:
    """Parse ``gaussian:S``, ``laplace:S``, ``linear`` or ``poly:DEG:OFFSET``."""
    parts = [p.strip() for p in spec.strip().split(":")]
    family = parts[0].lower()
    try:
        if family in ("gaussian", "laplace") and len(parts) == 2:
            return UnivariateKernel(family, domain_dim, sigma=float(parts[1]))
        if family == "linear" and len(parts) == 1:
            return UnivariateKernel("linear", domain_dim)
        if family == "poly" and len(parts) in (2, 3):
            offset = float(parts[2]) if len(parts) == 3 else 0.0
            return UnivariateKernel(
                "poly", domain_dim, degree=int(parts[1]), offset=offset
            )
    except ValueError as exc:
        raise ValidationError(f"Invalid kernel specification '{spec}': {exc}") from exc
    raise ValidationError(f"Invalid kernel specification '{spec}'")


def parse_kernel_spec(spec: str, domain_dim: int = 1) -> Kernel:
    """Parse a kernel specification string.

    ``induced(...)`` and ``pair-gaussian:S`` / ``pair-laplace:S`` give pairwise
    kernels; the bare univariate forms give univariate kernels.
    """
    match = _SPEC_RE.match(spec)
    if match:
        base = parse_univariate_spec(match.group("inner"), domain_dim)
        return PairwiseKernel("induced", base=base)
    head, _, tail = spec.strip().partition(":")
    if head.lower() in ("pair-gaussian", "pair-laplace"):
        try:
            sigma = float(tail)
        except ValueError as exc:
            raise ValidationError(f"Invalid kernel specification '{spec}'") from exc
        return PairwiseKernel(head.lower(), sigma=sigma, domain_dim=domain_dim)
    return parse_univariate_spec(spec, domain_dim)


def eval_univariate(k: UnivariateKernel, x: object, x2: object) -> float:
    """Return ``G(x, x2)`` for two single points."""
    return float(
        k.matrix(as_point(x, k.domain_dim), as_point(x2, k.domain_dim))[0, 0]
    )


def eval_pairwise(k: PairwiseKernel, p: object, q: object) -> float:
    """Return ``K(p, q)`` for two single pairs given as ``(x1, x2)``."""
    return float(k.matrix(as_pairs(p, k.domain_dim), as_pairs(q, k.domain_dim))[0, 0])


def gram(k: Kernel, points: object) -> np.ndarray:
    """Gram matrix of *k* on a nonempty list of points (or pairs)."""
    if isinstance(k, PairwiseKernel):
        stack = as_pairs(points, k.domain_dim)
    else:
        stack = as_points(points, k.domain_dim)
    if len(stack) == 0:
        raise ValidationError("gram() needs at least one point")
    matrix = k.matrix(stack, stack)
    # exact symmetry regardless of summation order inside the kernel
    return 0.5 * (matrix + matrix.T)


def is_psd(matrix: np.ndarray, tolerance: float = constants.PSD_TOLERANCE) -> bool:
    """True if every eigenvalue is at least ``-tolerance * trace``."""
    eigenvalues = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))
    scale = max(float(np.trace(matrix)), 0.0)
    return bool(eigenvalues.min(initial=0.0) >= -tolerance * scale)


def _domain_points(domain: Box | np.ndarray, dim: int, per_axis: int) -> np.ndarray:
    if isinstance(domain, Box):
        if domain.dim != dim:
            raise ValidationError("Domain dimension does not match the kernel")
        return domain.grid(per_axis)
    points = as_points(domain, dim)
    if len(points) == 0:
        raise ValidationError("kappa() needs a nonempty domain")
    return points


def _diameter(domain: Box | np.ndarray, dim: int) -> float:
    if isinstance(domain, Box):
        return domain.diameter
    points = _domain_points(domain, dim, 0)
    return float(cdist(points, points).max())


def kappa(
    k: PairwiseKernel,
    domain: Box | np.ndarray,
    *,
    grid_points: int = constants.KAPPA_GRID_POINTS,
    force_grid: bool = False,
) -> KappaBound:
    """Bound ``sup_{x, x'} sqrt(K((x, x'), (x, x')))`` over *domain*.

    Closed forms are used for the induced gaussian/laplace/linear kernels and
    for the direct kernels (whose diagonal is 1). Otherwise the maximum is taken
    over all pairs of a lattice (a box) or of the given point set, and inflated
    by ``KAPPA_GRID_INFLATION``.
    """
    dim = k.domain_dim
    if not isinstance(domain, Box):
        domain = as_points(domain, dim)
        if len(domain) == 0:
            raise ValidationError("kappa() needs a nonempty domain")

    if not force_grid:
        if not k.is_induced:
            return KappaBound(1.0, "analytic")
        base = k.base
        assert base is not None
        if base.family in ("gaussian", "laplace", "linear"):
            diam = _diameter(domain, dim)
            if base.family == "gaussian":
                value = np.sqrt(max(2.0 - 2.0 * np.exp(-(diam**2) / base.sigma), 0.0))
            elif base.family == "laplace":
                value = np.sqrt(max(2.0 - 2.0 * np.exp(-diam / base.sigma), 0.0))
            else:
                value = diam
            return KappaBound(float(value), "analytic")

    per_axis = grid_points
    if isinstance(domain, Box):
        cap = int(np.floor(constants.KAPPA_GRID_MAX_PAIRS ** (1.0 / (2 * dim))))
        per_axis = max(2, min(grid_points, cap))
    points = _domain_points(domain, dim, per_axis)
    n = len(points)
    pairs = np.stack([np.repeat(points, n, axis=0), np.tile(points, (n, 1))], axis=1)
    diag = np.clip(k.diagonal(pairs), 0.0, None)
    value = float(np.sqrt(diag.max())) * constants.KAPPA_GRID_INFLATION
    _logger.debug("kappa grid bound %.6g over %d points", value, n)
    return KappaBound(value, f"grid({n})", n)
