"""Kernel families on particle configurations and probability measures.

Two constructions over a base kernel k0:

* double-sum: k(mu, nu) = sum_ij w_i v_j k0(a_i, b_j), the inner product
  of the kernel mean embeddings of mu and nu; uniform weights recover the
  all-pairs average over two configurations.
* pullback: k(mu, nu) = k0(phi(mu), phi(nu)) for a permutation-invariant
  feature map phi (mean, raw moments, soft histogram).

Configuration-level evaluation is defined as evaluation on empirical
measures, so the two views coincide structurally. Atoms are canonically
ordered before any accumulation, which makes permutation invariance
bitwise exact rather than summation-order approximate.

Also here: kernel mean embeddings, MMD, the extension of a configuration
kernel to arbitrary measure pairs via value-plus-modulus minimization,
and empirical modulus-of-continuity estimation with a least concave
nondecreasing majorant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist

from . import transport
from .basekernels import (
    BaseKernel,
    GaussianKernel,
    InverseMultiquadricKernel,
    TableKernel,
    base_gram,
    base_lipschitz,
    eval_base,
    kernel_bound,
    kernel_metric,
    metric_matrix,
)
from .errors import (
    DimensionMismatch,
    EmptyCandidates,
    ModulusNotConcave,
    NegativeRadicand,
    ValidationError,
)
from .measures import (
    DiscreteMeasure,
    DomainBox,
    ParticleConfiguration,
    SamplerSpec,
    _freeze,
    _rng,
    canonical_order,
    empirical_measure,
)
from .transport import Euclidean, GroundMetric, KernelMetric, dkr2

__all__ = [
    "GaussianKernel",
    "InverseMultiquadricKernel",
    "TableKernel",
    "BaseKernel",
    "eval_base",
    "base_gram",
    "kernel_metric",
    "metric_matrix",
    "kernel_bound",
    "base_lipschitz",
    "MeanMap",
    "MomentsMap",
    "SoftHistogramMap",
    "FeatureMap",
    "feature_value",
    "fmap_lipschitz",
    "DoubleSumKernel",
    "PullbackKernel",
    "DistributionKernel",
    "distribution_kernel_bound",
    "eval_double_sum",
    "eval_pullback",
    "eval_kernel",
    "eval_config",
    "kme_eval",
    "mmd",
    "natural_ground_metric",
    "LinearModulus",
    "ModulusEstimate",
    "analytic_modulus",
    "estimate_modulus",
    "mcshane_extension",
]

MMD_RADICAND_TOL = 1e-12


# -- permutation-invariant feature maps ----------------------------------


@dataclass(frozen=True)
class MeanMap:
    """phi(mu) = weighted mean of atoms; 1-Lipschitz from (P(X), W1) to
    (R^d, ||.||): for any unit u, x -> <u, x> is 1-Lipschitz, so
    ||E_mu x - E_nu x|| <= W1(mu, nu)."""


@dataclass(frozen=True)
class MomentsMap:
    """Coordinatewise raw moments of orders 1..order, stacked."""

    order: int

    def __post_init__(self):
        if self.order < 1:
            raise ValidationError("moment order must be >= 1")


@dataclass(frozen=True, eq=False)
class SoftHistogramMap:
    """Gaussian-bump occupancy vector over a fixed grid."""

    grid: np.ndarray
    bandwidth: float

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim == 1:
            grid = grid[:, None]
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise ValidationError("bandwidth must be positive and finite")
        object.__setattr__(self, "grid", _freeze(grid))


FeatureMap = Union[MeanMap, MomentsMap, SoftHistogramMap]


def feature_value(fmap: FeatureMap, mu: DiscreteMeasure) -> np.ndarray:
    """Measure-level feature vector (atoms canonically ordered first)."""
    atoms, w = canonical_order(mu.atoms, mu.weights)
    if isinstance(fmap, MeanMap):
        return w @ atoms
    if isinstance(fmap, MomentsMap):
        stacked = np.stack([w @ atoms**q for q in range(1, fmap.order + 1)])
        return stacked.ravel()
    if fmap.grid.shape[1] != mu.dim:
        raise DimensionMismatch(f"grid dim {fmap.grid.shape[1]} vs measure dim {mu.dim}")
    bumps = np.exp(-cdist(fmap.grid, atoms, "sqeuclidean") / (2.0 * fmap.bandwidth**2))
    return bumps @ w


def fmap_lipschitz(fmap: FeatureMap, box: DomainBox | None = None) -> float:
    """Documented constant L with ||phi(mu) - phi(nu)|| <= L * W1(mu, nu)
    (Euclidean ground metric). Moments need the box for coordinate bounds;
    the soft-histogram constant is an upper bound, not known to be tight."""
    if isinstance(fmap, MeanMap):
        return 1.0
    if isinstance(fmap, MomentsMap):
        if box is None:
            raise ValidationError("moments feature map needs a box for its constant")
        bounds = np.maximum(np.abs(box.lower), np.abs(box.upper))
        coeffs = [
            q * b ** (q - 1) for b in bounds for q in range(1, fmap.order + 1)
        ]
        return float(np.sqrt(np.sum(np.square(coeffs))))
    n_grid = fmap.grid.shape[0]
    return math.sqrt(n_grid) * math.exp(-0.5) / fmap.bandwidth


# -- distribution kernels -------------------------------------------------


@dataclass(frozen=True)
class DoubleSumKernel:
    base: BaseKernel


@dataclass(frozen=True)
class PullbackKernel:
    base: BaseKernel
    fmap: FeatureMap


DistributionKernel = Union[DoubleSumKernel, PullbackKernel]


def distribution_kernel_bound(kspec: DistributionKernel) -> float:
    """Uniform bound C_k; both constructions inherit the base bound."""
    return kernel_bound(kspec.base)


def eval_double_sum(base: BaseKernel, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Weighted double sum sum_ij w_i v_j k0(a_i, b_j) = <KME(nu), KME(mu)>."""
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"measure dims {mu.dim} vs {nu.dim}")
    a, w = canonical_order(mu.atoms, mu.weights)
    b, v = canonical_order(nu.atoms, nu.weights)
    return float(w @ base_gram(base, a, b) @ v)


def eval_pullback(
    base: BaseKernel, fmap: FeatureMap, mu: DiscreteMeasure, nu: DiscreteMeasure
) -> float:
    """k0 evaluated at the two feature vectors."""
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"measure dims {mu.dim} vs {nu.dim}")
    return eval_base(base, feature_value(fmap, mu), feature_value(fmap, nu))


def eval_kernel(kspec: DistributionKernel, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    if isinstance(kspec, DoubleSumKernel):
        return eval_double_sum(kspec.base, mu, nu)
    return eval_pullback(kspec.base, kspec.fmap, mu, nu)


def eval_config(
    kspec: DistributionKernel, x: ParticleConfiguration, y: ParticleConfiguration
) -> float:
    """Configuration-level value: evaluation on the empirical measures."""
    return eval_kernel(kspec, empirical_measure(x), empirical_measure(y))


def kme_eval(base: BaseKernel, mu: DiscreteMeasure, x: np.ndarray) -> float:
    """Kernel mean embedding of mu evaluated at the point x:
    sum_i w_i k0(x, a_i)."""
    atoms, w = canonical_order(mu.atoms, mu.weights)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[0] != mu.dim:
        raise DimensionMismatch(f"point dim {x.shape[0]} vs measure dim {mu.dim}")
    return float(base_gram(base, x[None, :], atoms)[0] @ w)


def mmd(base: BaseKernel, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """RKHS distance between the mean embeddings of mu and nu."""
    s_mm = eval_double_sum(base, mu, mu)
    s_mn = eval_double_sum(base, mu, nu)
    s_nn = eval_double_sum(base, nu, nu)
    radicand = s_mm - 2.0 * s_mn + s_nn
    if radicand < -MMD_RADICAND_TOL:
        raise NegativeRadicand(f"mmd radicand {radicand:.3e}")
    return math.sqrt(max(radicand, 0.0))


def natural_ground_metric(kspec: DistributionKernel) -> GroundMetric:
    """Ground metric under which the family's continuity statement holds:
    the base-kernel metric for double sums, Euclidean for pullbacks."""
    if isinstance(kspec, DoubleSumKernel):
        return KernelMetric(kspec.base)
    return Euclidean()


# -- moduli of continuity -------------------------------------------------


@dataclass(frozen=True)
class LinearModulus:
    """w(r) = slope * r; concave and nondecreasing for slope >= 0."""

    slope: float

    def __post_init__(self):
        if not (self.slope >= 0 and math.isfinite(self.slope)):
            raise ValidationError("slope must be nonnegative and finite")

    def __call__(self, r):
        return self.slope * np.asarray(r, dtype=float)


@dataclass(frozen=True, eq=False)
class ModulusEstimate:
    """Sampled (distance, deviation) pairs with their least concave
    nondecreasing piecewise-linear majorant pinned at (0, 0).

    ``vertices`` run from the origin to the hull peak; beyond the peak the
    envelope plateaus at the peak height.
    """

    samples: np.ndarray
    vertices: np.ndarray

    def __post_init__(self):
        samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if vertices.shape[0] < 1 or vertices[0, 1] != 0.0 or vertices[0, 0] != 0.0:
            raise ModulusNotConcave("envelope must start at (0, 0)")
        dx = np.diff(vertices[:, 0])
        dy = np.diff(vertices[:, 1])
        if np.any(dx <= 0) or np.any(dy < -1e-15):
            raise ModulusNotConcave("envelope vertices must increase")
        slopes = dy / dx
        if np.any(np.diff(slopes) > 1e-12):
            raise ModulusNotConcave("envelope slopes must be nonincreasing")
        object.__setattr__(self, "samples", _freeze(samples))
        object.__setattr__(self, "vertices", _freeze(vertices))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        vx, vy = self.vertices[:, 0], self.vertices[:, 1]
        out = np.interp(r, vx, vy, left=0.0, right=float(vy[-1]))
        return out if out.ndim else float(out)

    def dominates_samples(self, slack: float = 1e-12) -> bool:
        return bool(np.all(self(self.samples[:, 0]) >= self.samples[:, 1] - slack))


def _concave_majorant(samples: np.ndarray) -> np.ndarray:
    """Vertices of the least concave nondecreasing majorant through (0,0).

    Upper convex hull of the sample cloud plus the origin; the decreasing
    tail of the hull is replaced by a plateau at the hull peak (any
    nondecreasing majorant is >= its own value at the peak there).
    """
    pts = np.vstack([[0.0, 0.0], samples])
    if np.any(pts[:, 0] < 0) or np.any(pts[:, 1] < 0):
        raise ValidationError("distances and deviations must be nonnegative")
    zero_r = pts[:, 0] <= 0.0
    if np.any(pts[zero_r, 1] > 1e-12):
        raise ModulusNotConcave("nonzero deviation at zero distance")
    order = np.lexsort((-pts[:, 1], pts[:, 0]))
    pts = pts[order]
    r, first = np.unique(pts[:, 0], return_index=True)
    s = pts[first, 1]  # max deviation per distinct distance
    s[0] = 0.0  # pin the origin (sub-1e-12 zero-distance noise was vetted above)
    hull: list[tuple[float, float]] = []
    for x, y in zip(r, s):
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) >= 0.0:
                hull.pop()
            else:
                break
        hull.append((float(x), float(y)))
    heights = [p[1] for p in hull]
    peak = int(np.argmax(heights))
    return np.asarray(hull[: peak + 1], dtype=float)


def analytic_modulus(
    kspec: DistributionKernel, box: DomainBox | None = None
) -> LinearModulus:
    """Closed-form modulus for the shipped families, preferred over
    estimates when available.

    * double-sum over a base bounded by C: w(r) = sqrt(C) * r, with r the
      sum of kernel-metric-ground W1 distances of the two argument pairs.
    * pullback: w(r) = L_base * L_phi * r with Euclidean-ground W1.

    Table bases have no Lipschitz constant, so pullbacks over them must be
    estimated instead.
    """
    if isinstance(kspec, DoubleSumKernel):
        return LinearModulus(math.sqrt(kernel_bound(kspec.base)))
    return LinearModulus(base_lipschitz(kspec.base) * fmap_lipschitz(kspec.fmap, box))


def estimate_modulus(
    kspec: DistributionKernel,
    m: int,
    sampler: SamplerSpec,
    trials: int,
    seed: int,
    metric: GroundMetric | None = None,
) -> ModulusEstimate:
    """Empirical modulus from random configuration quadruples.

    Each trial draws (x1, x1', x2, x2') of size ``m``, records the pair
    distance (sum of W1 distances under the family's natural ground
    metric, unless overridden) and the kernel deviation, then fits the
    least concave nondecreasing majorant. Trials are drawn sequentially
    from one stream, so a longer run extends a shorter one with the same
    seed and the envelope can only rise pointwise.
    """
    if trials < 10:
        raise ValidationError("need at least 10 trials")
    if metric is None:
        metric = natural_ground_metric(kspec)
    rng = _rng(seed)
    rows = np.empty((trials, 2))
    for t in range(trials):
        quad = [
            empirical_measure(ParticleConfiguration(sampler.sample(m, rng)))
            for _ in range(4)
        ]
        dist = dkr2((quad[0], quad[1]), (quad[2], quad[3]), metric)
        dev = abs(eval_kernel(kspec, quad[0], quad[1]) - eval_kernel(kspec, quad[2], quad[3]))
        rows[t] = (dist, dev)
    return ModulusEstimate(rows, _concave_majorant(rows))


Modulus = Union[LinearModulus, ModulusEstimate, Callable[[float], float]]


def _validate_modulus(modulus: Modulus, probe_max: float) -> None:
    if isinstance(modulus, (LinearModulus, ModulusEstimate)):
        return  # concave by construction
    probes = np.linspace(0.0, max(probe_max, 1e-6), 33)
    vals = np.asarray([float(modulus(p)) for p in probes])
    if abs(vals[0]) > 1e-12 or np.any(np.diff(vals) < -1e-12):
        raise ModulusNotConcave("modulus must vanish at 0 and be nondecreasing")
    if np.any(np.diff(vals, 2) > 1e-9):
        raise ModulusNotConcave("modulus fails midpoint concavity on the probe grid")


def mcshane_extension(
    kspec: DistributionKernel,
    m: int,
    modulus: Modulus,
    target: Tuple[DiscreteMeasure, DiscreteMeasure],
    candidates: Sequence[Tuple[ParticleConfiguration, ParticleConfiguration]],
    metric: GroundMetric | None = None,
) -> float:
    """Extension value at ``target``: min over candidate configuration
    pairs of kernel value plus modulus of the pair distance to the target.

    With a modulus that dominates the family's true oscillation and the
    candidate minimum standing in for the infimum over all pairs, this is
    a monotone-in-candidate-set upper approximation of the extension; at
    the empirical pair of a candidate it recovers the kernel value
    exactly.
    """
    if not candidates:
        raise EmptyCandidates("need at least one candidate pair")
    for x, y in candidates:
        if x.m != m or y.m != m:
            raise ValidationError(f"candidate size {x.m}, {y.m} != {m}")
    if metric is None:
        metric = natural_ground_metric(kspec)
    dists = [
        dkr2((empirical_measure(x), empirical_measure(y)), target, metric)
        for x, y in candidates
    ]
    _validate_modulus(modulus, max(dists))
    values = [
        eval_config(kspec, x, y) + float(modulus(d))
        for (x, y), d in zip(candidates, dists)
    ]
    return float(min(values))
