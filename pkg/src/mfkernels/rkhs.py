"""Gram matrices, finite kernel expansions, and ridge regression.

Expansions sum_n alpha_n k(., c_n) over measure centers are the
representable elements of the function space induced by a distribution
kernel; inner products, norms, evaluation, and the sup bound
|f| <= ||f|| sqrt(C_k) all reduce to Gram algebra.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .basekernels import base_gram
from .errors import (
    DimensionMismatch,
    KernelSpecMismatch,
    NegativeSquaredNorm,
    NonSymmetricInput,
    SingularSystem,
    ValidationError,
)
from .kernels import (
    DistributionKernel,
    DoubleSumKernel,
    distribution_kernel_bound,
    feature_value,
)
from .measures import (
    DiscreteMeasure,
    ParticleConfiguration,
    _freeze,
    canonical_order,
    check_same_dim,
    empirical_measure,
)

GRAM_SYMMETRY_TOL = 1e-12
NORM_CLAMP_TOL = 1e-10
RIDGE_RESIDUAL_TOL = 1e-8
JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)

_ATOM_CHUNK = 4_000_000  # max dense base-kernel block entries per chunk


def _as_measures(centers: Sequence) -> tuple:
    out = []
    for c in centers:
        if isinstance(c, ParticleConfiguration):
            c = empirical_measure(c)
        out.append(c)
    if not out:
        raise ValidationError("need at least one center")
    check_same_dim(*out)
    return tuple(out)


def kernel_matrix(
    kspec: DistributionKernel,
    rows: Sequence[DiscreteMeasure],
    cols: Sequence[DiscreteMeasure] | None = None,
) -> np.ndarray:
    """Dense kernel matrix between two center lists.

    Double-sum entries are assembled blockwise from one stacked
    atom-level base-kernel pass (chunked to bound memory); pullback
    entries go through per-center feature vectors. With ``cols=None`` the
    symmetric case stores each unordered pair once and mirrors.
    """
    rows = _as_measures(rows)
    symmetric = cols is None
    cols_m = rows if symmetric else _as_measures(cols)
    if rows[0].dim != cols_m[0].dim:
        raise DimensionMismatch(f"center dims {rows[0].dim} vs {cols_m[0].dim}")

    if isinstance(kspec, DoubleSumKernel):
        entries = _double_sum_matrix(kspec, rows, cols_m)
    else:
        feats_r = np.stack([feature_value(kspec.fmap, mu) for mu in rows])
        feats_c = feats_r if symmetric else np.stack(
            [feature_value(kspec.fmap, mu) for mu in cols_m]
        )
        entries = base_gram(kspec.base, feats_r, feats_c)
    if symmetric:
        upper = np.triu(entries)
        entries = upper + np.triu(entries, 1).T
    return entries


def _double_sum_matrix(kspec, rows, cols) -> np.ndarray:
    atoms_r, seg_r = _stack(rows)
    atoms_c, seg_c = _stack(cols)
    total_c = atoms_c.shape[0]
    out = np.zeros((atoms_r.shape[0], len(cols)))
    chunk = max(1, _ATOM_CHUNK // max(total_c, 1))
    for start in range(0, atoms_r.shape[0], chunk):
        stop = min(start + chunk, atoms_r.shape[0])
        out[start:stop] = base_gram(kspec.base, atoms_r[start:stop], atoms_c) @ seg_c
    return seg_r.T @ out


def _stack(measures):
    """Stacked canonical atoms and the (atoms x centers) weight indicator."""
    parts = [canonical_order(mu.atoms, mu.weights) for mu in measures]
    atoms = np.concatenate([a for a, _ in parts])
    seg = np.zeros((atoms.shape[0], len(measures)))
    pos = 0
    for j, (a, w) in enumerate(parts):
        seg[pos : pos + a.shape[0], j] = w
        pos += a.shape[0]
    return atoms, seg


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Symmetric kernel matrix over a fixed list of measure centers."""

    entries: np.ndarray
    centers: tuple

    def __post_init__(self):
        entries = np.atleast_2d(np.asarray(self.entries, dtype=float))
        if entries.shape[0] != entries.shape[1]:
            raise ValidationError("gram matrix must be square")
        object.__setattr__(self, "entries", _freeze(entries))
        object.__setattr__(self, "centers", tuple(self.centers))

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def gram(kspec: DistributionKernel, centers: Sequence) -> GramMatrix:
    """Gram matrix k(c_i, c_j); configurations are taken as their
    empirical measures."""
    centers = _as_measures(centers)
    return GramMatrix(kernel_matrix(kspec, centers), centers)


class PsdResult(NamedTuple):
    min_eigenvalue: float
    passed: bool


def psd_check(g: GramMatrix, tol: float = 1e-8) -> PsdResult:
    """Minimum eigenvalue via a symmetric eigensolve; passes when
    min_eig >= -tol * max(1, trace)."""
    entries = g.entries
    if float(np.max(np.abs(entries - entries.T))) > GRAM_SYMMETRY_TOL:
        raise NonSymmetricInput("gram matrix is not symmetric to 1e-12")
    min_eig = float(np.linalg.eigvalsh(entries)[0])
    trace = float(np.trace(entries))
    return PsdResult(min_eig, min_eig >= -tol * max(1.0, trace))


@dataclass(frozen=True, eq=False)
class Expansion:
    """Finite expansion sum_n alpha_n k(., center_n)."""

    centers: tuple
    coefficients: np.ndarray
    kernel: DistributionKernel
    meta: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        centers = _as_measures(self.centers)
        coeffs = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        if coeffs.ndim != 1 or coeffs.shape[0] != len(centers):
            raise ValidationError("one coefficient per center required")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "coefficients", _freeze(coeffs))

    @property
    def n_centers(self) -> int:
        return len(self.centers)

    @property
    def dim(self) -> int:
        return self.centers[0].dim


def kernel_section(kspec: DistributionKernel, mu: DiscreteMeasure) -> Expansion:
    """The canonical feature k(., mu) as a one-term expansion."""
    return Expansion((mu,), np.ones(1), kspec)


def expansion_eval(f: Expansion, mu) -> float:
    """Evaluate the expansion at a measure (or configuration)."""
    if isinstance(mu, ParticleConfiguration):
        mu = empirical_measure(mu)
    if mu.dim != f.dim:
        raise DimensionMismatch(f"input dim {mu.dim} vs expansion dim {f.dim}")
    row = kernel_matrix(f.kernel, (mu,), f.centers)
    return float(row[0] @ f.coefficients)


def expansion_eval_batch(f: Expansion, measures: Sequence) -> np.ndarray:
    """Vectorized expansion_eval over many inputs."""
    measures = _as_measures(measures)
    return kernel_matrix(f.kernel, measures, f.centers) @ f.coefficients


def expansion_inner(f: Expansion, g: Expansion) -> float:
    """Pre-space inner product sum_nm alpha_n beta_m k(c_m^g, c_n^f)."""
    if f.kernel != g.kernel:
        raise KernelSpecMismatch(f"{f.kernel} vs {g.kernel}")
    if f.dim != g.dim:
        raise DimensionMismatch(f"expansion dims {f.dim} vs {g.dim}")
    cross = kernel_matrix(f.kernel, f.centers, g.centers)
    return float(f.coefficients @ cross @ g.coefficients)


def rkhs_norm(f: Expansion) -> float:
    """sqrt(<f, f>); squared norms within -1e-10 of zero clamp to zero."""
    sq = expansion_inner(f, f)
    if sq < -NORM_CLAMP_TOL:
        raise NegativeSquaredNorm(f"<f,f> = {sq:.3e}")
    return float(np.sqrt(max(sq, 0.0)))


def ridge_fit(
    kspec: DistributionKernel,
    centers: Sequence,
    targets: np.ndarray,
    lam: float,
) -> Expansion:
    """Kernel ridge regression: solve (K + lambda N I) alpha = y.

    Cholesky with jitter escalation (lambda plus {0, 1e-12, 1e-10, 1e-8}
    times trace/N) covers numerically singular Grams from near-duplicate
    centers; the jitter actually used and the residual are recorded in
    the expansion's ``meta``. The N-scaled regularizer keeps lambda's
    meaning stable across training-set sizes.
    """
    centers = _as_measures(centers)
    y = np.atleast_1d(np.asarray(targets, dtype=float))
    n = len(centers)
    if y.shape != (n,):
        raise ValidationError(f"targets shape {y.shape} != ({n},)")
    if lam < 0:
        raise ValidationError("lambda must be >= 0")
    k = gram(kspec, centers).entries
    y_norm = float(np.linalg.norm(y))
    if y_norm == 0.0:
        return Expansion(centers, np.zeros(n), kspec,
                         meta={"lambda": lam, "jitter": 0.0, "residual": 0.0})
    scale = float(np.trace(k)) / n
    for jitter in JITTER_LADDER:
        lam_eff = lam + jitter * scale
        system = k + lam_eff * n * np.eye(n)
        try:
            factor = cho_factor(system, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            continue
        alpha = cho_solve(factor, y, check_finite=False)
        residual = float(np.linalg.norm(system @ alpha - y))
        if residual <= RIDGE_RESIDUAL_TOL * y_norm:
            return Expansion(
                centers, alpha, kspec,
                meta={"lambda": lam, "jitter": jitter * scale, "residual": residual},
            )
    raise SingularSystem("ridge system not solvable within the jitter ladder")


class SupBoundResult(NamedTuple):
    max_abs: float
    bound: float
    passed: bool


def sup_bound_check(
    f: Expansion, c_k: float | None = None, probes: Sequence = ()
) -> SupBoundResult:
    """Check |f(probe)| <= ||f|| sqrt(C_k) over the probe measures."""
    if not probes:
        raise ValidationError("need at least one probe")
    if c_k is None:
        c_k = distribution_kernel_bound(f.kernel)
    values = expansion_eval_batch(f, probes)
    max_abs = float(np.max(np.abs(values)))
    bound = rkhs_norm(f) * float(np.sqrt(c_k))
    return SupBoundResult(max_abs, bound, max_abs <= bound + 1e-9)
