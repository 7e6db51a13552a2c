"""Particle-system data generation and permutation-invariant observables.

Observables are symmetric, bounded, uniformly continuous functionals of
the configuration, and each ships with its measure-level counterpart so
studies against the many-particle limit have exact ground truth.
Configuration-level evaluation is defined as the measure-level value at
the empirical measure, making the coincidence structural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist

from .errors import HeterogeneousConfigs, ValidationError
from .kernels import LinearModulus
from .measures import (
    DiscreteMeasure,
    DomainBox,
    ParticleConfiguration,
    SeedLike,
    _rng,
    canonical_order,
    empirical_measure,
)

# -- pair potentials ------------------------------------------------------


@dataclass(frozen=True)
class GaussianPotential:
    """phi(z) = exp(-||z||^2 / (2 gamma))."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValidationError("gamma must be positive")

    def of_sq(self, sq: np.ndarray) -> np.ndarray:
        return np.exp(-sq / (2.0 * self.gamma))

    bound = 1.0

    @property
    def lipschitz(self) -> float:
        return math.exp(-0.5) / math.sqrt(self.gamma)


@dataclass(frozen=True)
class InverseQuadraticPotential:
    """phi(z) = (1 + ||z||^2 / c^2)^{-1}."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValidationError("c must be positive")

    def of_sq(self, sq: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + sq / (self.c * self.c))

    bound = 1.0

    @property
    def lipschitz(self) -> float:
        # max of (2r/c^2)(1 + r^2/c^2)^{-2} at r = c/sqrt(3)
        return 3.0 * math.sqrt(3.0) / (8.0 * self.c)


@dataclass(frozen=True)
class ConstantPotential:
    """phi identically equal to ``value`` (constant observable)."""

    value: float

    def of_sq(self, sq: np.ndarray) -> np.ndarray:
        return np.full_like(np.asarray(sq, dtype=float), self.value)

    @property
    def bound(self) -> float:
        return abs(self.value)

    lipschitz = 0.0


PairPotential = Union[GaussianPotential, InverseQuadraticPotential, ConstantPotential]


# -- observables ----------------------------------------------------------


@dataclass(frozen=True)
class CoordinateMean:
    """First coordinate of the (weighted) mean."""


@dataclass(frozen=True)
class Variance:
    """Total variance: mean squared deviation from the mean."""


@dataclass(frozen=True)
class InteractionEnergy:
    """All-pairs average of a pair potential, self-pairs included."""

    potential: PairPotential


ObservableSpec = Union[CoordinateMean, Variance, InteractionEnergy]


def observable_limit(spec: ObservableSpec, mu: DiscreteMeasure) -> float:
    """Measure-level functional (the many-particle limit form)."""
    atoms, w = canonical_order(mu.atoms, mu.weights)
    if isinstance(spec, CoordinateMean):
        return float(w @ atoms[:, 0])
    if isinstance(spec, Variance):
        mean = w @ atoms
        return float(w @ np.sum((atoms - mean) ** 2, axis=1))
    sq = cdist(atoms, atoms, "sqeuclidean")
    return float(w @ spec.potential.of_sq(sq) @ w)


def eval_observable(spec: ObservableSpec, config: ParticleConfiguration) -> float:
    """Configuration-level value: the limit functional at the empirical
    measure (so the two coincide by construction)."""
    return observable_limit(spec, empirical_measure(config))


def observable_bound(spec: ObservableSpec, box: DomainBox) -> float:
    """Uniform bound for the observable on configurations in the box."""
    if isinstance(spec, CoordinateMean):
        return float(max(abs(box.lower[0]), abs(box.upper[0])))
    if isinstance(spec, Variance):
        return float(np.sum(((box.upper - box.lower) / 2.0) ** 2))
    return float(spec.potential.bound)


def observable_modulus(spec: ObservableSpec, box: DomainBox) -> LinearModulus:
    """Linear modulus w.r.t. the Euclidean-ground W1 distance of the
    empirical measures."""
    if isinstance(spec, CoordinateMean):
        return LinearModulus(1.0)
    if isinstance(spec, Variance):
        radius = float(np.linalg.norm(np.maximum(np.abs(box.lower), np.abs(box.upper))))
        return LinearModulus(4.0 * radius)
    return LinearModulus(2.0 * spec.potential.lipschitz)


def describe_observable(spec: ObservableSpec) -> dict:
    """Plain-dict description (used in dataset metadata and files)."""
    if isinstance(spec, CoordinateMean):
        return {"kind": "coordinate_mean"}
    if isinstance(spec, Variance):
        return {"kind": "variance"}
    pot = spec.potential
    if isinstance(pot, GaussianPotential):
        pd = {"kind": "gaussian", "gamma": pot.gamma}
    elif isinstance(pot, InverseQuadraticPotential):
        pd = {"kind": "inverse_quadratic", "c": pot.c}
    else:
        pd = {"kind": "constant", "value": pot.value}
    return {"kind": "interaction_energy", "potential": pd}


# -- dynamics -------------------------------------------------------------


@dataclass(frozen=True)
class PureDiffusion:
    """Brownian particles with reflection at the box walls."""

    box: DomainBox
    sigma: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if self.sigma < 0:
            raise ValidationError("sigma must be nonnegative")

    def drift(self, points: np.ndarray) -> np.ndarray:
        return np.zeros_like(points)


@dataclass(frozen=True)
class AttractionRepulsion:
    """Mean-attraction plus softened pairwise repulsion, diffusive noise,
    reflecting walls."""

    box: DomainBox
    dt: float
    sigma: float
    attraction: float = 1.0
    repulsion: float = 0.1
    softening: float = 1e-2

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if self.sigma < 0:
            raise ValidationError("sigma must be nonnegative")
        if self.softening <= 0:
            raise ValidationError("softening must be positive")

    def drift(self, points: np.ndarray) -> np.ndarray:
        m = points.shape[0]
        center = points.mean(axis=0)
        force = self.attraction * (center - points)
        diffs = points[:, None, :] - points[None, :, :]
        sq = np.sum(diffs**2, axis=-1) + self.softening
        force += self.repulsion * np.sum(diffs / sq[..., None], axis=1) / m
        return force


DynamicsSpec = Union[PureDiffusion, AttractionRepulsion]


def _reflect(points: np.ndarray, box: DomainBox) -> np.ndarray:
    span = box.upper - box.lower
    folded = np.mod(points - box.lower, 2.0 * span)
    return box.lower + span - np.abs(folded - span)


def simulate(
    dyn: DynamicsSpec, m: int, steps: int, seed: SeedLike
) -> list[ParticleConfiguration]:
    """Euler-Maruyama trajectory of ``steps`` updates from a uniform
    initial draw; returns steps + 1 configurations, all inside the box."""
    if m < 1 or steps < 0:
        raise ValidationError("need m >= 1 and steps >= 0")
    rng = _rng(seed)
    box = dyn.box
    pts = box.lower + rng.uniform(size=(m, box.dim)) * (box.upper - box.lower)
    out = [ParticleConfiguration(pts)]
    root_dt = math.sqrt(dyn.dt)
    for _ in range(steps):
        noise = dyn.sigma * root_dt * rng.standard_normal(pts.shape)
        pts = _reflect(pts + dyn.drift(pts) * dyn.dt + noise, box)
        out.append(ParticleConfiguration(pts))
    return out


# -- datasets -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled configurations sharing one (M, d), plus plain metadata."""

    records: Tuple[Tuple[ParticleConfiguration, float], ...]
    metadata: dict

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def configurations(self) -> list[ParticleConfiguration]:
        return [c for c, _ in self.records]

    def labels(self) -> np.ndarray:
        return np.array([y for _, y in self.records])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Dataset)
            and self.metadata == other.metadata
            and len(self) == len(other)
            and all(
                c1 == c2 and y1 == y2
                for (c1, y1), (c2, y2) in zip(self.records, other.records)
            )
        )


def make_dataset(
    configs: Sequence[ParticleConfiguration],
    observable: ObservableSpec,
    metadata: dict | None = None,
) -> Dataset:
    """Label configurations with the observable; all must share (M, d)."""
    if not configs:
        raise ValidationError("need at least one configuration")
    shapes = {(c.m, c.dim) for c in configs}
    if len(shapes) != 1:
        raise HeterogeneousConfigs(f"mixed (M, d): {sorted(shapes)}")
    m, d = shapes.pop()
    labels = [eval_observable(observable, c) for c in configs]
    if not all(math.isfinite(y) for y in labels):
        raise ValidationError("labels must be finite")
    meta = {
        "m": m,
        "dim": d,
        "n_records": len(configs),
        "observable": describe_observable(observable),
    }
    meta.update(metadata or {})
    return Dataset(tuple(zip(configs, labels)), meta)
