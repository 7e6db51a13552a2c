import json
import math

import numpy as np
import pytest

from mfkernels import (
    AttractionRepulsion,
    ConstantPotential,
    ConvergenceReport,
    CoordinateMean,
    Dirac,
    DomainBox,
    DoubleSumKernel,
    GaussianKernel,
    GaussianPotential,
    InteractionEnergy,
    LinearModulus,
    MeanMap,
    MixtureOfUniforms,
    MomentsMap,
    PullbackKernel,
    TableKernel,
    TransferReport,
    TruncatedNormal,
    UniformBox,
    Variance,
    analytic_modulus,
    emit_report,
    functional_transfer_study,
    kernel_convergence_study,
    mcshane_consistency_check,
    observable_convergence_study,
    observable_population_limit,
    pair_population_integral,
    population_feature,
    population_kernel_limit,
    uniform_interval,
)
from mfkernels.errors import UnknownLimit, ValidationError
from mfkernels.fileio import load_report
from mfkernels.kernels import base_gram

# frozen from a 30-digit adaptive quadrature of the normalized double
# integral of exp(-(x-y)^2) over [0, 0.4] x [0.6, 1.0]
DS_LIMIT_DISJOINT = 0.6923188807428653


class TestPopulationIntegrals:
    def test_uniform_moments(self):
        u = uniform_interval(0.0, 1.0)
        np.testing.assert_allclose(population_feature(MeanMap(), u), [0.5], atol=1e-12)
        np.testing.assert_allclose(
            population_feature(MomentsMap(3), u), [1 / 2, 1 / 3, 1 / 4], atol=1e-12
        )

    def test_truncnorm_mean_matches_scipy(self):
        from scipy.stats import truncnorm

        box = DomainBox([0.0], [1.0])
        sampler = TruncatedNormal(box, [0.3], [0.4])
        a, b = (0.0 - 0.3) / 0.4, (1.0 - 0.3) / 0.4
        expected = truncnorm.mean(a, b, loc=0.3, scale=0.4)
        np.testing.assert_allclose(
            population_feature(MeanMap(), sampler), [expected], atol=1e-10
        )

    def test_mixture_mean_is_weighted_average(self):
        mix = MixtureOfUniforms(
            (uniform_interval(0.0, 0.2), uniform_interval(0.8, 1.0)), [0.25, 0.75]
        )
        expected = 0.25 * 0.1 + 0.75 * 0.9
        np.testing.assert_allclose(population_feature(MeanMap(), mix), [expected], atol=1e-12)

    def test_dirac_feature_is_point_value(self):
        np.testing.assert_allclose(
            population_feature(MomentsMap(2), Dirac([0.3])), [0.3, 0.09], atol=1e-15
        )

    def test_double_integral_frozen_value(self, gauss):
        val = pair_population_integral(
            lambda xs, ys: base_gram(gauss, xs, ys),
            uniform_interval(0.0, 0.4),
            uniform_interval(0.6, 1.0),
        )
        assert val == pytest.approx(DS_LIMIT_DISJOINT, abs=1e-12)

    def test_dimension_cap(self, gauss):
        box3 = DomainBox(np.zeros(3), np.ones(3))
        with pytest.raises(UnknownLimit):
            pair_population_integral(
                lambda xs, ys: base_gram(gauss, xs, ys), UniformBox(box3), UniformBox(box3)
            )


class TestKernelLimits:
    def test_pullback_limit_is_base_at_population_means(self, gauss):
        kspec = PullbackKernel(gauss, MeanMap())
        val = population_kernel_limit(
            kspec, uniform_interval(0.0, 0.4), uniform_interval(0.6, 1.0)
        )
        assert val == pytest.approx(math.exp(-((0.8 - 0.2) ** 2)), abs=1e-12)

    def test_double_sum_limit_matches_quadrature(self, gauss):
        val = population_kernel_limit(
            DoubleSumKernel(gauss), uniform_interval(0.0, 0.4), uniform_interval(0.6, 1.0)
        )
        assert val == pytest.approx(DS_LIMIT_DISJOINT, abs=1e-12)

    def test_table_double_sum_has_no_certified_limit(self):
        table = TableKernel(np.array([[0.0], [1.0]]), np.eye(2))
        with pytest.raises(UnknownLimit):
            population_kernel_limit(
                DoubleSumKernel(table), uniform_interval(0, 1), uniform_interval(0, 1)
            )


class TestKernelConvergenceStudy:
    def test_degenerate_dirac_sampler_zero_errors(self, pullback, double_sum):
        mu = Dirac([0.3])
        for kspec in (pullback, double_sum):
            rep = kernel_convergence_study(kspec, mu, mu, [4, 16, 64], range(8))
            assert all(m == 0.0 for m in rep.medians)
            assert rep.slope == 0.0

    def test_pullback_errors_shrink(self, pullback):
        rep = kernel_convergence_study(
            pullback, uniform_interval(0.0, 0.4), uniform_interval(0.6, 1.0),
            [16, 1024], range(16),
        )
        assert rep.medians[-1] < rep.medians[0]
        assert rep.meta["limit"] == pytest.approx(math.exp(-0.36), abs=1e-12)

    def test_double_sum_errors_shrink(self, double_sum):
        rep = kernel_convergence_study(
            double_sum, uniform_interval(0.0, 0.4), uniform_interval(0.6, 1.0),
            [16, 1024], range(16),
        )
        assert rep.medians[-1] < rep.medians[0]

    def test_deterministic_and_thread_invariant(self, pullback):
        args = (pullback, uniform_interval(0, 0.4), uniform_interval(0.6, 1.0),
                [8, 32], range(8))
        a = kernel_convergence_study(*args)
        b = kernel_convergence_study(*args)
        c = kernel_convergence_study(*args, threads=4)
        assert a == b == c


class TestObservableConvergenceStudy:
    def test_interaction_energy_errors_shrink(self):
        spec = InteractionEnergy(GaussianPotential(0.5))
        rep = observable_convergence_study(
            spec, uniform_interval(0.0, 1.0), [16, 1024], range(16)
        )
        assert rep.medians[-1] < rep.medians[0]

    def test_limit_values(self):
        u = uniform_interval(0.0, 1.0)
        assert observable_population_limit(CoordinateMean(), u) == pytest.approx(0.5, abs=1e-12)
        assert observable_population_limit(Variance(), u) == pytest.approx(1 / 12, abs=1e-12)


class TestMcshaneConsistency:
    def test_pair_alone_recovers_exactly(self, pullback):
        dev = mcshane_consistency_check(pullback, 6, 1, seed=4, n_decoys=0)
        assert dev == 0.0

    def test_with_decoys_stays_exact(self, pullback):
        dev = mcshane_consistency_check(pullback, 8, 15, seed=1, n_decoys=16)
        assert dev <= 1e-12

    def test_undersized_modulus_violation_is_reported(self, pullback):
        half = LinearModulus(analytic_modulus(pullback).slope / 2.0)
        dev = mcshane_consistency_check(
            pullback, 8, 15, seed=1, n_decoys=16, modulus=half
        )
        assert dev > 1e-4  # the halved modulus no longer dominates


class TestFunctionalTransfer:
    def test_constant_observable_is_exactly_learnable(self, double_sum):
        spec = InteractionEnergy(ConstantPotential(0.7))
        rep = functional_transfer_study(
            double_sum, spec, train_m=8, test_m_list=[8, 16], n_train=20,
            n_test=10, lam=0.0, seed=5,
        )
        assert all(r <= 1e-6 for r in rep.rmse)

    def test_train_equals_test_runs(self, double_sum):
        spec = InteractionEnergy(GaussianPotential(0.5))
        rep = functional_transfer_study(
            double_sum, spec, train_m=8, test_m_list=[8], n_train=30,
            n_test=20, lam=1e-6, seed=7,
        )
        assert rep.rmse[0] >= 0.0 and rep.test_m == (8,)

    def test_dynamics_source(self, double_sum):
        spec = InteractionEnergy(GaussianPotential(0.5))
        dyn = AttractionRepulsion(
            DomainBox([0.0], [1.0]), dt=0.05, sigma=0.05, attraction=0.5,
            repulsion=0.02,
        )
        rep = functional_transfer_study(
            double_sum, spec, train_m=8, test_m_list=[8, 16], n_train=40,
            n_test=30, lam=1e-6, seed=3, source=dyn,
        )
        assert all(r < b for r, b in zip(rep.rmse, rep.baseline_rmse))

    def test_transfer_rmse_within_indist_plus_meanfield_gap(self, double_sum):
        # RMSE at test_M >= train_M stays below 2x the in-distribution RMSE
        # plus the observable's mean-field gap median at test_M
        spec = InteractionEnergy(GaussianPotential(0.5))
        u = uniform_interval(0.0, 1.0)
        train_m, test_m = 16, 64
        rep = functional_transfer_study(
            double_sum, spec, train_m=train_m, test_m_list=[train_m, test_m],
            n_train=60, n_test=40, lam=1e-6, seed=11, source=u,
        )
        gaps = observable_convergence_study(spec, u, [train_m, test_m], range(16))
        assert rep.rmse[1] <= 2.0 * rep.rmse[0] + gaps.medians[1]


class TestReports:
    def _conv_report(self):
        return ConvergenceReport(
            (4, 8), (0.2, 0.1), (0.15, 0.05), (0.3, 0.2), -0.5,
            tuple(range(8)), meta={"study": "kernel_convergence", "limit": 0.25},
        )

    def _transfer_report(self):
        return TransferReport(
            8, (8, 16), (0.01, 0.02), (0.05, 0.06), 1e-6, 20, 10, 3,
            meta={"study": "functional_transfer", "constant_baseline": 0.1},
        )

    def test_json_round_trip(self, tmp_path):
        for rep in (self._conv_report(), self._transfer_report()):
            path = tmp_path / "rep.json"
            emit_report(rep, path, "json")
            assert load_report(path) == rep

    def test_csv_round_trip(self, tmp_path):
        for rep in (self._conv_report(), self._transfer_report()):
            path = tmp_path / "rep.csv"
            emit_report(rep, path, "csv")
            assert load_report(path) == rep

    def test_csv_structure(self, tmp_path):
        path = tmp_path / "rep.csv"
        emit_report(self._conv_report(), path, "csv")
        lines = path.read_text().splitlines()
        header = [l for l in lines if l.startswith("#")]
        data = [l for l in lines if l and not l.startswith("#") and l[0].isdigit()]
        assert any("columns" in h for h in header)
        assert len(data) == 2  # one row per grid point

    def test_emitted_json_validates_against_shipped_schema(self, tmp_path):
        import jsonschema
        from importlib import resources

        cases = [
            (self._conv_report(), "convergence_report.schema.json"),
            (self._transfer_report(), "transfer_report.schema.json"),
        ]
        for rep, schema_name in cases:
            path = tmp_path / "rep.json"
            emit_report(rep, path, "json")
            schema = json.loads(
                resources.files("mfkernels.schemas").joinpath(schema_name).read_text()
            )
            jsonschema.validate(json.loads(path.read_text()), schema)

    def test_write_dat(self, tmp_path):
        path = tmp_path / "rep.dat"
        from mfkernels.fileio import write_dat

        write_dat(self._conv_report(), path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("#")
        assert len(lines) == 3

    def test_report_validation(self):
        with pytest.raises(ValidationError):
            ConvergenceReport((8, 4), (0.1, 0.2), (0.1, 0.2), (0.1, 0.2), -0.5,
                              tuple(range(8)))
        with pytest.raises(ValidationError):
            ConvergenceReport((4, 8), (0.1, 0.2), (0.1, 0.2), (0.1, 0.2), -0.5,
                              (1, 2, 3))
        with pytest.raises(ValidationError):
            TransferReport(8, (8,), (-0.1,), (0.1,), 1e-6, 10, 5, 1)
