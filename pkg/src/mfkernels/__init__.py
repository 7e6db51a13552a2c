"""Kernels on particle configurations and discrete probability measures.

The library couples discrete optimal transport (Wasserstein-1 with
pluggable ground metrics) with two kernel constructions on measures
(double-sum and feature-map pullback), the function-space machinery they
induce (Gram matrices, expansions, ridge regression), and an experiment
harness that measures how configuration-level kernels and observables
approach their measure-level limits as the particle count grows.
"""

__version__ = "0.1.0"

from .measures import (  # noqa: F401
    Dirac,
    DiscreteMeasure,
    DomainBox,
    MixtureOfUniforms,
    ParticleConfiguration,
    TruncatedNormal,
    UniformBox,
    coalesce,
    dirac,
    empirical_measure,
    measure_mean,
    sample_configuration,
    uniform_interval,
    unit_box,
    validate_measure,
)
from .transport import (  # noqa: F401
    Euclidean,
    ExplicitMatrix,
    KernelMetric,
    SinkhornResult,
    TransportPlan,
    check_ground_metric,
    cost_matrix,
    dkr2,
    w1_1d,
    w1_bruteforce,
    w1_exact,
    w1_sinkhorn,
)
from .kernels import (  # noqa: F401
    DoubleSumKernel,
    GaussianKernel,
    InverseMultiquadricKernel,
    LinearModulus,
    MeanMap,
    ModulusEstimate,
    MomentsMap,
    PullbackKernel,
    SoftHistogramMap,
    TableKernel,
    analytic_modulus,
    distribution_kernel_bound,
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
)
from .rkhs import (  # noqa: F401
    Expansion,
    GramMatrix,
    expansion_eval,
    expansion_eval_batch,
    expansion_inner,
    gram,
    kernel_section,
    psd_check,
    ridge_fit,
    rkhs_norm,
    sup_bound_check,
)
from .particles import (  # noqa: F401
    AttractionRepulsion,
    ConstantPotential,
    CoordinateMean,
    Dataset,
    GaussianPotential,
    InteractionEnergy,
    InverseQuadraticPotential,
    PureDiffusion,
    Variance,
    eval_observable,
    make_dataset,
    observable_bound,
    observable_limit,
    observable_modulus,
    simulate,
)
from .meanfield import (  # noqa: F401
    ConvergenceReport,
    TransferReport,
    emit_report,
    functional_transfer_study,
    kernel_convergence_study,
    mcshane_consistency_check,
    observable_convergence_study,
    observable_population_limit,
    pair_population_integral,
    population_feature,
    population_kernel_limit,
)
