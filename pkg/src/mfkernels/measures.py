"""Points, particle configurations, and discrete probability measures.

The ambient space is a compact axis-aligned box in R^d. Configurations
are ordered tuples of M points; discrete measures are weighted atom
lists. Empirical measures (uniform weights 1/M) identify configurations
with measures and are never coalesced on construction.

All types are immutable after construction (backing arrays are marked
read-only) and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import (
    AtomOutsideDomain,
    DimensionMismatch,
    EmptySupport,
    NegativeWeight,
    ValidationError,
    WeightSumOffByMoreThanTolerance,
)

WEIGHT_SUM_TOL = 1e-12

SeedLike = Union[int, np.random.SeedSequence]


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(int(seed)))


def derive_seed(*parts: int) -> np.random.SeedSequence:
    """Deterministic child seed from integer parts (study cell indexing)."""
    return np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts])


@dataclass(frozen=True, eq=False)
class DomainBox:
    """Compact axis-aligned box [lower_1, upper_1] x ... x [lower_d, upper_d]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.ndim != 1 or hi.ndim != 1 or lo.shape != hi.shape:
            raise ValidationError("box bounds must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValidationError("box bounds must be finite")
        if not np.all(lo < hi):
            raise ValidationError("box must satisfy lower < upper in every coordinate")
        object.__setattr__(self, "lower", _freeze(lo))
        object.__setattr__(self, "upper", _freeze(hi))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, points: np.ndarray, atol: float = 0.0) -> bool:
        pts = np.atleast_2d(points)
        return bool(
            np.all(pts >= self.lower - atol) and np.all(pts <= self.upper + atol)
        )

    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DomainBox)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))


def unit_box(dim: int = 1) -> DomainBox:
    return DomainBox(np.zeros(dim), np.ones(dim))


@dataclass(frozen=True, eq=False)
class ParticleConfiguration:
    """Ordered tuple of M points in R^d, stored as an (M, d) array."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValidationError("configuration needs an (M, d) array with M >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("configuration points must be finite")
        object.__setattr__(self, "points", _freeze(pts))

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def permuted(self, perm: Sequence[int]) -> "ParticleConfiguration":
        return ParticleConfiguration(self.points[np.asarray(perm, dtype=int)])

    def __eq__(self, other) -> bool:
        return isinstance(other, ParticleConfiguration) and np.array_equal(
            self.points, other.points
        )

    def __hash__(self):
        return hash(self.points.tobytes())


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted atoms sum_i w_i * delta(a_i) with w_i >= 0, sum w_i = 1."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if atoms.ndim != 2 or w.ndim != 1 or atoms.shape[0] != w.shape[0]:
            raise ValidationError("atoms (n, d) and weights (n,) must align")
        object.__setattr__(self, "atoms", _freeze(atoms))
        object.__setattr__(self, "weights", _freeze(w))

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DiscreteMeasure)
            and np.array_equal(self.atoms, other.atoms)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.atoms.tobytes(), self.weights.tobytes()))


def dirac(point: Sequence[float] | float) -> DiscreteMeasure:
    """Unit mass at a single point."""
    pt = np.atleast_1d(np.asarray(point, dtype=float))
    return DiscreteMeasure(pt[None, :], np.ones(1))


def empirical_measure(config: ParticleConfiguration) -> DiscreteMeasure:
    """Uniform-weight measure on the configuration's points, order preserved.

    Duplicate points stay separate atoms; integration against any test
    function is unaffected.
    """
    m = config.m
    return DiscreteMeasure(config.points, np.full(m, 1.0 / m))


def measure_mean(mu: DiscreteMeasure) -> np.ndarray:
    """Weighted mean sum_i w_i a_i, componentwise."""
    return mu.weights @ mu.atoms


def validate_measure(mu: DiscreteMeasure, box: DomainBox | None = None) -> None:
    """Raise a typed error unless ``mu`` satisfies the measure invariants.

    Weight-sum drift up to 1e-12 absolute is accepted. With ``box`` given,
    atoms must lie inside it (inclusive).
    """
    if mu.n_atoms < 1:
        raise EmptySupport("measure has no atoms")
    if not np.all(np.isfinite(mu.atoms)):
        raise ValidationError("atoms must be finite")
    if np.any(mu.weights < 0.0):
        raise NegativeWeight(f"negative weight {mu.weights.min()}")
    drift = abs(float(np.sum(mu.weights)) - 1.0)
    if drift > WEIGHT_SUM_TOL:
        raise WeightSumOffByMoreThanTolerance(
            f"weights sum to 1{drift:+.3e}, tolerance {WEIGHT_SUM_TOL}"
        )
    if box is not None:
        if box.dim != mu.dim:
            raise DimensionMismatch(f"measure dim {mu.dim} vs box dim {box.dim}")
        if not box.contains(mu.atoms):
            raise AtomOutsideDomain("an atom lies outside the domain box")


def check_same_dim(*objs) -> int:
    dims = {o.dim for o in objs}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed dimensions {sorted(dims)}")
    return dims.pop()


def coalesce(mu: DiscreteMeasure) -> DiscreteMeasure:
    """Merge exactly-equal atoms, summing their weights (order of first
    occurrence preserved)."""
    atoms, idx = np.unique(mu.atoms, axis=0, return_inverse=True)
    weights = np.zeros(atoms.shape[0])
    np.add.at(weights, idx, mu.weights)
    # restore first-occurrence order
    first = np.full(atoms.shape[0], mu.n_atoms, dtype=int)
    np.minimum.at(first, idx, np.arange(mu.n_atoms))
    order = np.argsort(first, kind="stable")
    return DiscreteMeasure(atoms[order], weights[order])


def canonical_order(atoms: np.ndarray, weights: np.ndarray):
    """Sort atoms lexicographically by coordinates, then weight.

    Kernel and feature-map evaluations run on canonically ordered data so
    permutation invariance holds bitwise, not merely to summation-order
    tolerance.
    """
    d = atoms.shape[1]
    keys = (weights, *(atoms[:, j] for j in range(d - 1, -1, -1)))
    idx = np.lexsort(keys)
    return atoms[idx], weights[idx]


# -- samplers ------------------------------------------------------------


@dataclass(frozen=True)
class UniformBox:
    """i.i.d. uniform draws on a box."""

    box: DomainBox

    @property
    def dim(self) -> int:
        return self.box.dim

    def sample(self, m: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.uniform(size=(m, self.dim))
        return self.box.lower + u * (self.box.upper - self.box.lower)


@dataclass(frozen=True, eq=False)
class TruncatedNormal:
    """Coordinatewise-independent normal truncated to a box (inverse-CDF
    sampling, so draws consume exactly m*d uniforms)."""

    box: DomainBox
    loc: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        loc = np.broadcast_to(np.asarray(self.loc, dtype=float), (self.box.dim,))
        scale = np.broadcast_to(np.asarray(self.scale, dtype=float), (self.box.dim,))
        if np.any(scale <= 0):
            raise ValidationError("scale must be positive")
        object.__setattr__(self, "loc", _freeze(loc.copy()))
        object.__setattr__(self, "scale", _freeze(scale.copy()))

    @property
    def dim(self) -> int:
        return self.box.dim

    def sample(self, m: int, rng: np.random.Generator) -> np.ndarray:
        from scipy.stats import truncnorm

        u = rng.uniform(size=(m, self.dim))
        out = np.empty((m, self.dim))
        for j in range(self.dim):
            a = (self.box.lower[j] - self.loc[j]) / self.scale[j]
            b = (self.box.upper[j] - self.loc[j]) / self.scale[j]
            out[:, j] = truncnorm.ppf(u[:, j], a, b, loc=self.loc[j], scale=self.scale[j])
        return np.clip(out, self.box.lower, self.box.upper)


@dataclass(frozen=True, eq=False)
class MixtureOfUniforms:
    """Finite mixture of box-uniform components."""

    components: tuple
    weights: np.ndarray

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValidationError("mixture needs at least one component")
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if w.shape[0] != len(comps):
            raise ValidationError("one weight per component required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError("mixture weights must be nonnegative and sum to 1")
        dims = {c.dim for c in comps}
        if len(dims) != 1:
            raise DimensionMismatch("mixture components must share a dimension")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", _freeze(w))

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def box(self) -> DomainBox:
        lo = np.min([c.box.lower for c in self.components], axis=0)
        hi = np.max([c.box.upper for c in self.components], axis=0)
        return DomainBox(lo, hi)

    def sample(self, m: int, rng: np.random.Generator) -> np.ndarray:
        which = rng.choice(len(self.components), size=m, p=self.weights)
        u = rng.uniform(size=(m, self.dim))
        lo = np.stack([c.box.lower for c in self.components])[which]
        hi = np.stack([c.box.upper for c in self.components])[which]
        return lo + u * (hi - lo)


@dataclass(frozen=True, eq=False)
class Dirac:
    """Degenerate sampler: every draw is the same point (zero variance)."""

    point: np.ndarray

    def __post_init__(self):
        pt = np.atleast_1d(np.asarray(self.point, dtype=float))
        if not np.all(np.isfinite(pt)):
            raise ValidationError("point must be finite")
        object.__setattr__(self, "point", _freeze(pt))

    @property
    def dim(self) -> int:
        return self.point.shape[0]

    @property
    def box(self) -> DomainBox:
        return DomainBox(self.point - 0.5, self.point + 0.5)

    def sample(self, m: int, rng: np.random.Generator) -> np.ndarray:
        return np.tile(self.point, (m, 1))


SamplerSpec = Union[UniformBox, TruncatedNormal, MixtureOfUniforms, Dirac]


def uniform_interval(a: float, b: float) -> UniformBox:
    return UniformBox(DomainBox(np.array([a]), np.array([b])))


def sample_configuration(
    dist: SamplerSpec, m: int, seed: SeedLike
) -> ParticleConfiguration:
    """Draw M i.i.d. points; deterministic given (dist, m, seed)."""
    if m < 1:
        raise ValidationError("m must be >= 1")
    return ParticleConfiguration(dist.sample(int(m), _rng(seed)))
