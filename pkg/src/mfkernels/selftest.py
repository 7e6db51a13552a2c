"""Embedded invariant suite: a compact, fast subset of the package's
property checks, runnable from the installed artifact (`mfkernels
selftest`). The full suite lives in the test tree."""

from __future__ import annotations

import math

import numpy as np

from .basekernels import GaussianKernel, eval_base, kernel_metric
from .kernels import (
    DoubleSumKernel,
    MeanMap,
    PullbackKernel,
    analytic_modulus,
    eval_config,
    eval_double_sum,
    kme_eval,
    mmd,
)
from .measures import DiscreteMeasure, ParticleConfiguration, empirical_measure
from .meanfield import mcshane_consistency_check
from .rkhs import expansion_eval_batch, gram, psd_check, ridge_fit
from .transport import KernelMetric, w1_1d, w1_bruteforce, w1_exact


def _random_measure(rng, max_atoms=6, d=1):
    n = int(rng.integers(1, max_atoms + 1))
    atoms = rng.uniform(size=(n, d))
    w = rng.uniform(0.1, 1.0, size=n)
    return DiscreteMeasure(atoms, w / w.sum())


def run_selftest() -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(20240800)
    g = GaussianKernel(0.5)
    ds = DoubleSumKernel(g)
    pb = PullbackKernel(g, MeanMap())
    results = []

    def check(name, worst, tol):
        results.append((name, worst <= tol, f"worst {worst:.3e} vs tol {tol:.1e}"))

    worst = abs(eval_base(g, np.zeros(1), np.ones(1)) - math.exp(-1.0))
    worst = max(worst, abs(kernel_metric(g, np.zeros(1), np.ones(1))
                           - math.sqrt(2 - 2 * math.exp(-1.0))))
    check("base kernel reference values", worst, 1e-15)

    worst = 0.0
    for _ in range(25):
        mu, nu = _random_measure(rng), _random_measure(rng)
        worst = max(worst, abs(w1_exact(mu, nu)[0] - w1_1d(mu, nu)))
    check("w1 exact vs 1d closed form", worst, 1e-9)

    worst = 0.0
    for _ in range(25):
        mu, nu = _random_measure(rng, 4, 2), _random_measure(rng, 4, 2)
        worst = max(worst, abs(w1_exact(mu, nu)[0] - w1_bruteforce(mu, nu)))
    check("w1 exact vs vertex enumeration", worst, 1e-9)

    worst = 0.0
    for _ in range(50):
        mu, nu = _random_measure(rng, 5, 2), _random_measure(rng, 5, 2)
        naive = math.fsum(
            wi * vj * eval_base(g, ai, bj)
            for ai, wi in zip(mu.atoms, mu.weights)
            for bj, vj in zip(nu.atoms, nu.weights)
        )
        worst = max(worst, abs(eval_double_sum(g, mu, nu) - naive))
    check("double sum equals KME inner product", worst, 1e-12)

    worst = 0.0
    for _ in range(50):
        m = int(rng.integers(2, 17))
        x = ParticleConfiguration(rng.uniform(size=(m, 2)))
        y = ParticleConfiguration(rng.uniform(size=(m, 2)))
        perm = rng.permutation(m)
        for k in (ds, pb):
            worst = max(worst, abs(eval_config(k, x, y) - eval_config(k, x.permuted(perm), y)))
    check("permutation invariance", worst, 1e-12)

    min_eig = np.inf
    for k in (ds, pb):
        for _ in range(8):
            centers = [_random_measure(rng, 6, 2) for _ in range(8)]
            res = psd_check(gram(k, centers))
            if not res.passed:
                min_eig = min(min_eig, res.min_eigenvalue)
    results.append(("gram matrices positive semidefinite", min_eig == np.inf,
                    f"worst failing eigenvalue {min_eig:.3e}" if min_eig < np.inf else "all passed"))

    worst = 0.0
    for _ in range(25):
        mu, nu = _random_measure(rng), _random_measure(rng)
        gap = mmd(g, mu, nu) - w1_exact(mu, nu, KernelMetric(g))[0]
        worst = max(worst, gap)
    check("mmd below kernel-ground w1", worst, 1e-9)

    dev = mcshane_consistency_check(pb, 8, 10, seed=7, n_decoys=8)
    check("extension exact at empirical pairs", dev, 1e-12)

    # interpolation at lambda 0 requires a well-conditioned gram
    # (min eigenvalue >= 1e-8): short lengthscale, separated centers
    sharp = DoubleSumKernel(GaussianKernel(0.02))
    centers = [DiscreteMeasure([[x]], [1.0]) for x in np.linspace(0.0, 1.0, 6)]
    targets = rng.normal(size=6)
    assert psd_check(gram(sharp, centers)).min_eigenvalue >= 1e-8
    model = ridge_fit(sharp, centers, targets, 0.0)
    worst = float(np.max(np.abs(expansion_eval_batch(model, centers) - targets)))
    check("ridge interpolates at lambda 0", worst, 1e-6)

    mu = _random_measure(rng, 4, 1)
    x = ParticleConfiguration(np.full((5, 1), 0.3))
    lhs = kme_eval(g, mu, np.array([0.3]))
    rhs = eval_double_sum(g, empirical_measure(x), mu)
    check("kme matches constant-configuration kernel", abs(lhs - rhs), 1e-14)

    mod = analytic_modulus(pb)
    val = mod(0.25)
    results.append(("analytic modulus linear and pinned at zero",
                    mod(0.0) == 0.0 and abs(val - 0.25 * mod.slope) < 1e-15,
                    f"w(0.25) = {val:.6f}"))
    return results


def format_results(results) -> str:
    lines = []
    for name, ok, detail in results:
        lines.append(f"{'PASS' if ok else 'FAIL'}  {name}  [{detail}]")
    n_fail = sum(1 for _, ok, _ in results if not ok)
    lines.append(f"{len(results) - n_fail}/{len(results)} checks passed")
    return "\n".join(lines)
