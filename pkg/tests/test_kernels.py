import math

import numpy as np
import pytest

from mfkernels import (
    Dirac,
    DiscreteMeasure,
    DoubleSumKernel,
    GaussianKernel,
    InverseMultiquadricKernel,
    KernelMetric,
    LinearModulus,
    MeanMap,
    ModulusEstimate,
    MomentsMap,
    ParticleConfiguration,
    PullbackKernel,
    SoftHistogramMap,
    TableKernel,
    analytic_modulus,
    dirac,
    dkr2,
    empirical_measure,
    estimate_modulus,
    eval_base,
    eval_config,
    eval_double_sum,
    eval_kernel,
    eval_pullback,
    feature_value,
    kernel_bound,
    kernel_metric,
    kme_eval,
    mcshane_extension,
    mmd,
    natural_ground_metric,
    sample_configuration,
    uniform_interval,
    unit_box,
    w1_exact,
)
from mfkernels.errors import EmptyCandidates, ModulusNotConcave, NegativeRadicand
from mfkernels.kernels import fmap_lipschitz
from mfkernels.measures import DomainBox

from conftest import random_measure

EXP_M1 = 0.36787944117144233          # exp(-1) at double precision
METRIC_AT_1 = 1.1243847729568003      # sqrt(2 - 2 exp(-1)) at double precision


class TestEvalBase:
    def test_gaussian_diagonal_is_one(self, rng, gauss):
        for _ in range(5):
            x = rng.uniform(size=3)
            assert eval_base(gauss, x, x) == 1.0

    def test_gaussian_unit_distance(self, gauss):
        assert eval_base(gauss, np.zeros(1), np.ones(1)) == pytest.approx(
            EXP_M1, abs=1e-16
        )

    def test_swap_bitwise_symmetric(self, rng, gauss):
        for spec in (gauss, InverseMultiquadricKernel(0.7)):
            x, y = rng.uniform(size=2), rng.uniform(size=2)
            assert eval_base(spec, x, y) == eval_base(spec, y, x)

    def test_imq_bounded_by_one(self, rng):
        spec = InverseMultiquadricKernel(0.5)
        for _ in range(20):
            x, y = rng.uniform(-2, 2, size=3), rng.uniform(-2, 2, size=3)
            assert 0.0 < eval_base(spec, x, y) <= 1.0

    def test_table_kernel_snaps_to_grid(self):
        grid = np.array([[0.0], [1.0]])
        values = np.array([[2.0, 0.5], [0.5, 3.0]])
        spec = TableKernel(grid, values)
        assert eval_base(spec, [0.1], [0.9]) == 0.5
        assert eval_base(spec, [0.4], [0.4]) == 2.0  # ties break to lowest index
        assert kernel_bound(spec) == 3.0


class TestKernelMetric:
    def test_zero_at_equal_points(self, rng, gauss):
        x = rng.uniform(size=2)
        assert kernel_metric(gauss, x, x) == 0.0

    def test_gaussian_closed_form(self, rng, gauss):
        for _ in range(10):
            x, y = rng.uniform(size=2), rng.uniform(size=2)
            r2 = float(np.sum((x - y) ** 2))
            expected = math.sqrt(max(2.0 - 2.0 * math.exp(-r2 / 1.0), 0.0))
            assert kernel_metric(gauss, x, y) == pytest.approx(expected, abs=1e-14)

    def test_unit_distance_value(self, gauss):
        assert kernel_metric(gauss, np.zeros(1), np.ones(1)) == pytest.approx(
            METRIC_AT_1, abs=1e-15
        )

    def test_negative_radicand_signals_bad_table(self):
        grid = np.array([[0.0], [1.0]])
        values = np.array([[1.0, 2.0], [2.0, 1.0]])  # not PSD
        spec = TableKernel(grid, values)
        with pytest.raises(NegativeRadicand):
            kernel_metric(spec, [0.0], [1.0])


class TestDoubleSum:
    def test_single_atoms_reduce_to_base(self, rng, gauss):
        x, y = rng.uniform(size=2), rng.uniform(size=2)
        assert eval_double_sum(gauss, dirac(x), dirac(y)) == pytest.approx(
            eval_base(gauss, x, y), abs=1e-16
        )

    def test_duplicated_atoms_collapse(self, rng, gauss):
        a = rng.uniform(size=2)
        nu = random_measure(rng, 4, 2)
        doubled = empirical_measure(ParticleConfiguration([a, a]))
        assert eval_double_sum(gauss, doubled, nu) == pytest.approx(
            eval_double_sum(gauss, dirac(a), nu), abs=1e-16
        )

    def test_matches_naive_loop(self, rng, gauss):
        worst = 0.0
        for _ in range(50):
            mu = random_measure(rng, 3, 2)
            nu = random_measure(rng, 2, 2)
            naive = math.fsum(
                wi * vj * eval_base(gauss, ai, bj)
                for ai, wi in zip(mu.atoms, mu.weights)
                for bj, vj in zip(nu.atoms, nu.weights)
            )
            val = eval_double_sum(gauss, mu, nu)
            worst = max(worst, abs(val - naive) / abs(naive))
        assert worst <= 1e-12

    def test_symmetric(self, rng, gauss):
        mu, nu = random_measure(rng, 5, 1), random_measure(rng, 3, 1)
        assert eval_double_sum(gauss, mu, nu) == pytest.approx(
            eval_double_sum(gauss, nu, mu), abs=1e-15
        )


class TestPullback:
    def test_mean_gaussian_composition(self, rng, gauss):
        mu, nu = random_measure(rng, 4, 2), random_measure(rng, 4, 2)
        expected = eval_base(
            gauss, mu.weights @ mu.atoms, nu.weights @ nu.atoms
        )
        assert eval_pullback(gauss, MeanMap(), mu, nu) == pytest.approx(
            expected, abs=1e-14
        )

    def test_self_value_one_for_gaussian(self, rng, gauss):
        mu = random_measure(rng, 5, 1)
        assert eval_pullback(gauss, MeanMap(), mu, mu) == 1.0

    def test_mean_map_non_injectivity(self, gauss):
        mu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
        nu = dirac(0.5)  # same mean, different measure
        assert eval_pullback(gauss, MeanMap(), mu, nu) == pytest.approx(1.0, abs=1e-15)


class TestFeatureMaps:
    def test_exact_permutation_invariance(self, rng):
        pts = rng.uniform(size=(9, 2))
        cfg, perm = ParticleConfiguration(pts), rng.permutation(9)
        grid = rng.uniform(size=(4, 2))
        for fmap in (MeanMap(), MomentsMap(3), SoftHistogramMap(grid, 0.3)):
            a = feature_value(fmap, empirical_measure(cfg))
            b = feature_value(fmap, empirical_measure(cfg.permuted(perm)))
            np.testing.assert_array_equal(a, b)

    def test_moments_orders(self, rng):
        mu = random_measure(rng, 5, 2)
        vals = feature_value(MomentsMap(2), mu)
        expected = np.concatenate(
            [mu.weights @ mu.atoms, mu.weights @ mu.atoms**2]
        )
        np.testing.assert_allclose(vals, expected, atol=1e-15)

    @pytest.mark.parametrize("d", [1, 2])
    def test_uniform_continuity_with_documented_constant(self, rng, d):
        box = DomainBox(np.zeros(d), np.ones(d))
        grid = rng.uniform(size=(3, d))
        for fmap in (MeanMap(), MomentsMap(2), SoftHistogramMap(grid, 0.4)):
            lip = fmap_lipschitz(fmap, box)
            worst = 0.0
            for _ in range(40):
                mu = random_measure(rng, 6, d)
                nu = random_measure(rng, 6, d)
                gap = float(
                    np.linalg.norm(feature_value(fmap, mu) - feature_value(fmap, nu))
                )
                dist, _ = w1_exact(mu, nu)
                worst = max(worst, gap - lip * dist)
            assert worst <= 1e-9


class TestKme:
    def test_dirac_reduces_to_base(self, rng, gauss):
        x, y = rng.uniform(size=2), rng.uniform(size=2)
        assert kme_eval(gauss, dirac(y), x) == eval_base(gauss, x, y)

    def test_two_atom_average(self, rng, gauss):
        a, b, x = rng.uniform(size=2), rng.uniform(size=2), rng.uniform(size=2)
        mu = empirical_measure(ParticleConfiguration([a, b]))
        expected = 0.5 * (eval_base(gauss, x, a) + eval_base(gauss, x, b))
        assert kme_eval(gauss, mu, x) == pytest.approx(expected, abs=1e-16)

    def test_constant_configuration_identity(self, rng, gauss):
        # embedding evaluated at a point equals the kernel against the
        # constant configuration representing that point's dirac measure
        worst = 0.0
        for _ in range(25):
            mu = random_measure(rng, 5, 1)
            x = rng.uniform(size=1)
            m = int(rng.integers(1, 9))
            const_cfg = ParticleConfiguration(np.tile(x, (m, 1)))
            lhs = kme_eval(gauss, mu, x)
            rhs = eval_double_sum(gauss, empirical_measure(const_cfg), mu)
            worst = max(worst, abs(lhs - rhs))
        assert worst <= 1e-14


class TestMmd:
    def test_self_is_zero(self, rng, gauss):
        mu = random_measure(rng, 6, 2)
        assert mmd(gauss, mu, mu) == 0.0

    def test_diracs_reduce_to_kernel_metric(self, rng, gauss):
        x, y = rng.uniform(size=2), rng.uniform(size=2)
        assert mmd(gauss, dirac(x), dirac(y)) == pytest.approx(
            kernel_metric(gauss, x, y), abs=1e-14
        )

    def test_unit_distance_value(self, gauss):
        assert mmd(gauss, dirac(0.0), dirac(1.0)) == pytest.approx(
            METRIC_AT_1, abs=1e-15
        )

    def test_dominated_by_kernel_ground_w1(self, rng, gauss):
        worst = -np.inf
        for _ in range(100):
            mu = random_measure(rng, 6, 1)
            nu = random_measure(rng, 6, 1)
            gap = mmd(gauss, mu, nu) - w1_exact(mu, nu, KernelMetric(gauss))[0]
            worst = max(worst, gap)
        assert worst <= 1e-9


class TestKernelFamilyInvariants:
    def test_permutation_invariance_bitwise(self, rng, double_sum, pullback):
        for _ in range(100):
            m = int(rng.integers(1, 33))
            x = ParticleConfiguration(rng.uniform(size=(m, 2)))
            y = ParticleConfiguration(rng.uniform(size=(m, 2)))
            perm = rng.permutation(m)
            for kspec in (double_sum, pullback):
                assert eval_config(kspec, x.permuted(perm), y) == eval_config(kspec, x, y)

    def test_uniform_boundedness_across_m(self, rng, double_sum, pullback):
        for m in (1, 4, 16, 64, 256):
            for _ in range(50):
                x = ParticleConfiguration(rng.uniform(size=(m, 2)))
                y = ParticleConfiguration(rng.uniform(size=(m, 2)))
                for kspec in (double_sum, pullback):
                    val = eval_config(kspec, x, y)
                    assert 0.0 <= val <= kernel_bound(kspec.base)

    def test_double_sum_continuity_bound(self, rng, gauss, double_sum):
        # |k(x1,x1') - k(x2,x2')| <= sqrt(C) (W1~(mu1,mu2) + W1~(mu1',mu2'))
        # with the kernel-metric ground distance
        metric = KernelMetric(gauss)
        worst = -np.inf
        for _ in range(150):
            m = int(rng.integers(2, 13))
            cfgs = [ParticleConfiguration(rng.uniform(size=(m, 1))) for _ in range(4)]
            mus = [empirical_measure(c) for c in cfgs]
            lhs = abs(eval_config(double_sum, cfgs[0], cfgs[1])
                      - eval_config(double_sum, cfgs[2], cfgs[3]))
            rhs = (w1_exact(mus[0], mus[2], metric)[0]
                   + w1_exact(mus[1], mus[3], metric)[0])
            worst = max(worst, lhs - math.sqrt(kernel_bound(gauss)) * rhs)
        assert worst <= 1e-9

    def test_natural_ground_metric_choice(self, gauss, double_sum, pullback):
        from mfkernels import Euclidean

        assert natural_ground_metric(double_sum) == KernelMetric(gauss)
        assert natural_ground_metric(pullback) == Euclidean()


class TestAnalyticModulus:
    def test_double_sum_slope_is_root_bound(self, gauss, double_sum):
        assert analytic_modulus(double_sum).slope == 1.0  # sqrt(C) = 1 for gaussian

    def test_pullback_mean_gaussian_slope(self, pullback):
        # lipschitz of the gaussian (e^{-1/2}/sqrt(gamma)) times L_mean = 1
        assert analytic_modulus(pullback).slope == pytest.approx(
            math.exp(-0.5) / math.sqrt(0.5), abs=1e-15
        )

    def test_modulus_dominates_observed_deviations(self, rng, pullback):
        mod = analytic_modulus(pullback)
        metric = natural_ground_metric(pullback)
        worst = -np.inf
        for _ in range(50):
            cfgs = [ParticleConfiguration(rng.uniform(size=(6, 1))) for _ in range(4)]
            mus = [empirical_measure(c) for c in cfgs]
            dev = abs(eval_config(pullback, cfgs[0], cfgs[1])
                      - eval_config(pullback, cfgs[2], cfgs[3]))
            dist = dkr2((mus[0], mus[1]), (mus[2], mus[3]), metric)
            worst = max(worst, dev - float(mod(dist)))
        assert worst <= 1e-12


class TestEstimateModulus:
    def test_constant_kernel_gives_zero_envelope(self):
        grid = np.array([[0.0], [0.5], [1.0]])
        table = TableKernel(grid, np.ones((3, 3)))
        est = estimate_modulus(
            DoubleSumKernel(table), 4, uniform_interval(0, 1), trials=12, seed=5
        )
        assert np.all(est.samples[:, 1] == 0.0)
        assert float(est(0.7)) == 0.0

    def test_pullback_deviations_within_spec_constant(self, pullback):
        # per-argument constant sqrt(d) e^{-1/2} / sqrt(gamma), d = 1
        est = estimate_modulus(pullback, 8, uniform_interval(0, 1), trials=60, seed=9)
        bound = math.sqrt(1) * math.exp(-0.5) / math.sqrt(0.5)
        assert np.all(est.samples[:, 1] <= bound * est.samples[:, 0] + 1e-12)

    def test_envelope_dominates_and_is_concave(self, pullback):
        est = estimate_modulus(pullback, 6, uniform_interval(0, 1), trials=40, seed=2)
        assert est.dominates_samples()
        slopes = np.diff(est.vertices[:, 1]) / np.diff(est.vertices[:, 0])
        assert np.all(np.diff(slopes) <= 1e-12)
        assert est.vertices[0, 0] == 0.0 and est.vertices[0, 1] == 0.0

    def test_doubling_trials_raises_envelope_pointwise(self, pullback):
        small = estimate_modulus(pullback, 6, uniform_interval(0, 1), trials=20, seed=11)
        large = estimate_modulus(pullback, 6, uniform_interval(0, 1), trials=40, seed=11)
        # same seed prefix: the first 20 samples coincide
        np.testing.assert_array_equal(small.samples, large.samples[:20])
        probes = np.linspace(0.0, float(large.samples[:, 0].max()) * 1.2, 50)
        assert np.all(large(probes) >= small(probes) - 1e-15)

    def test_deterministic(self, pullback):
        a = estimate_modulus(pullback, 5, uniform_interval(0, 1), trials=15, seed=3)
        b = estimate_modulus(pullback, 5, uniform_interval(0, 1), trials=15, seed=3)
        np.testing.assert_array_equal(a.samples, b.samples)
        np.testing.assert_array_equal(a.vertices, b.vertices)


class TestMcshaneExtension:
    def _candidates(self, rng, m, count):
        u = uniform_interval(0, 1)
        return [
            (sample_configuration(u, m, int(rng.integers(1 << 31))),
             sample_configuration(u, m, int(rng.integers(1 << 31))))
            for _ in range(count)
        ]

    def test_exact_at_own_empirical_pair(self, rng, pullback):
        mod = analytic_modulus(pullback)
        cands = self._candidates(rng, 8, 8)
        target_pair = cands[3]
        target = (empirical_measure(target_pair[0]), empirical_measure(target_pair[1]))
        value = mcshane_extension(pullback, 8, mod, target, cands)
        assert abs(value - eval_config(pullback, *target_pair)) <= 1e-12

    def test_monotone_in_candidate_set(self, rng, pullback):
        mod = analytic_modulus(pullback)
        cands = self._candidates(rng, 6, 12)
        mu = random_measure(rng, 6, 1)
        nu = random_measure(rng, 6, 1)
        values = [
            mcshane_extension(pullback, 6, mod, (mu, nu), cands[:k])
            for k in (2, 5, 8, 12)
        ]
        assert all(b <= a + 1e-15 for a, b in zip(values, values[1:]))

    def test_singleton_is_value_plus_modulus(self, pullback):
        # constant configurations make the pair distance exact by hand
        mod = analytic_modulus(pullback)
        cand = (ParticleConfiguration([[0.2], [0.2]]), ParticleConfiguration([[0.8], [0.8]]))
        target = (dirac(0.4), dirac(0.9))  # dkr2 = 0.2 + 0.1
        value = mcshane_extension(pullback, 2, mod, target, [cand])
        expected = eval_config(pullback, *cand) + float(mod(0.2 + 0.1))
        assert value == pytest.approx(expected, abs=1e-12)

    def test_lower_bounded_by_min_kernel_value(self, rng, double_sum):
        mod = analytic_modulus(double_sum)
        cands = self._candidates(rng, 5, 6)
        floor = min(eval_config(double_sum, a, b) for a, b in cands)
        mu = random_measure(rng, 5, 1)
        value = mcshane_extension(double_sum, 5, mod, (mu, mu), cands)
        assert value >= floor - 1e-12

    def test_empty_candidates(self, rng, pullback):
        mu = random_measure(rng, 4, 1)
        with pytest.raises(EmptyCandidates):
            mcshane_extension(pullback, 4, analytic_modulus(pullback), (mu, mu), [])

    def test_non_concave_modulus_rejected(self, rng, pullback):
        cands = self._candidates(rng, 4, 2)
        mu = random_measure(rng, 4, 1)
        with pytest.raises(ModulusNotConcave):
            mcshane_extension(pullback, 4, lambda r: r * r, (mu, mu), cands)


def test_modulus_estimate_rejects_bad_vertices():
    with pytest.raises(ModulusNotConcave):
        ModulusEstimate(np.array([[0.5, 0.1]]), np.array([[0.0, 0.0], [0.5, 0.1], [1.0, 0.9]]))
    with pytest.raises(ModulusNotConcave):
        ModulusEstimate(np.array([[0.5, 0.1]]), np.array([[0.1, 0.2], [0.5, 0.3]]))


def test_linear_modulus_rejects_negative_slope():
    with pytest.raises(Exception):
        LinearModulus(-1.0)
