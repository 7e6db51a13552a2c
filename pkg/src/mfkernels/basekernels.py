"""Base kernels k0 on the ambient box and the metric they induce.

Three families: Gaussian with lengthscale gamma, inverse multiquadric
with scale c, and an explicit PSD table over a fixed finite grid
(nearest-grid lookup, lowest index on ties).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatch, NegativeRadicand, NonSymmetricInput, ValidationError
from .measures import _freeze

METRIC_RADICAND_TOL = 1e-12


@dataclass(frozen=True)
class GaussianKernel:
    """k0(x, y) = exp(-||x - y||^2 / (2 gamma))."""

    gamma: float

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValidationError("gamma must be positive and finite")


@dataclass(frozen=True)
class InverseMultiquadricKernel:
    """k0(x, y) = (1 + ||x - y||^2 / c^2)^{-1/2}, bounded by 1."""

    c: float

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValidationError("c must be positive and finite")


@dataclass(frozen=True, eq=False)
class TableKernel:
    """Explicit symmetric value table over a fixed grid of points.

    Off-grid arguments snap to the nearest grid point (Euclidean, lowest
    index on ties), so the kernel is total on the box but discontinuous;
    positive definiteness is inherited from the table.
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim == 1:
            grid = grid[:, None]
        vals = np.asarray(self.values, dtype=float)
        n = grid.shape[0]
        if vals.shape != (n, n):
            raise ValidationError("values must be an n x n table over the n grid points")
        if not np.allclose(vals, vals.T, atol=0, rtol=0):
            raise NonSymmetricInput("kernel table must be exactly symmetric")
        object.__setattr__(self, "grid", _freeze(grid))
        object.__setattr__(self, "values", _freeze(vals))

    def snap(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.argmin(cdist(pts, self.grid), axis=1)


BaseKernel = Union[GaussianKernel, InverseMultiquadricKernel, TableKernel]


def kernel_bound(spec: BaseKernel) -> float:
    """Uniform bound C with |k0| <= C everywhere."""
    if isinstance(spec, (GaussianKernel, InverseMultiquadricKernel)):
        return 1.0
    return float(np.max(np.abs(spec.values)))


def base_lipschitz(spec: BaseKernel) -> float:
    """Lipschitz constant of y -> k0(y, y') w.r.t. the Euclidean norm,
    uniform over the other argument. Undefined for table kernels."""
    if isinstance(spec, GaussianKernel):
        # max of (r/gamma) exp(-r^2/2gamma) at r = sqrt(gamma)
        return math.exp(-0.5) / math.sqrt(spec.gamma)
    if isinstance(spec, InverseMultiquadricKernel):
        # max of (r/c^2)(1 + r^2/c^2)^{-3/2} at r = c/sqrt(2)
        return 2.0 / (3.0 * math.sqrt(3.0) * spec.c)
    raise ValidationError("table kernels have no Lipschitz constant")


def base_gram(spec: BaseKernel, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Pairwise kernel matrix k0(xs_i, ys_j) for (n, d) and (m, d) inputs."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    if xs.shape[1] != ys.shape[1]:
        raise DimensionMismatch(f"point dims {xs.shape[1]} vs {ys.shape[1]}")
    if isinstance(spec, GaussianKernel):
        sq = cdist(xs, ys, "sqeuclidean")
        return np.exp(-sq / (2.0 * spec.gamma))
    if isinstance(spec, InverseMultiquadricKernel):
        sq = cdist(xs, ys, "sqeuclidean")
        return 1.0 / np.sqrt(1.0 + sq / (spec.c * spec.c))
    ix = spec.snap(xs)
    iy = spec.snap(ys)
    return spec.values[np.ix_(ix, iy)]


def eval_base(spec: BaseKernel, x: np.ndarray, y: np.ndarray) -> float:
    """Scalar kernel value at two points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise DimensionMismatch(f"point dims {x.shape} vs {y.shape}")
    return float(base_gram(spec, x[None, :], y[None, :])[0, 0])


def _clamped_sqrt(radicand: np.ndarray | float):
    r = np.asarray(radicand, dtype=float)
    if np.any(r < -METRIC_RADICAND_TOL):
        raise NegativeRadicand(
            f"metric radicand {float(np.min(r)):.3e} below -{METRIC_RADICAND_TOL}"
        )
    return np.sqrt(np.maximum(r, 0.0))


def kernel_metric(spec: BaseKernel, x: np.ndarray, y: np.ndarray) -> float:
    """Induced (pseudo)metric sqrt(k0(x,x) - 2 k0(x,y) + k0(y,y)).

    Delegates to metric_matrix so scalar and matrix evaluations agree
    bitwise."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise DimensionMismatch(f"point dims {x.shape} vs {y.shape}")
    return float(metric_matrix(spec, x[None, :], y[None, :])[0, 0])


def metric_matrix(spec: BaseKernel, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Pairwise induced-metric matrix; raises NegativeRadicand when the
    table is not PSD enough to keep radicands above -1e-12."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    if isinstance(spec, (GaussianKernel, InverseMultiquadricKernel)):
        # diagonal is identically 1 for both families
        cross = base_gram(spec, xs, ys)
        return _clamped_sqrt(2.0 - 2.0 * cross)
    dx = np.diag(spec.values)[spec.snap(xs)]
    dy = np.diag(spec.values)[spec.snap(ys)]
    cross = base_gram(spec, xs, ys)
    return _clamped_sqrt(dx[:, None] - 2.0 * cross + dy[None, :])
