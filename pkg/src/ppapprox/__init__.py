"""Explicit Poisson approximation bounds for stretched spatial point processes.

The package evaluates upper bounds on the distance between a point process
seen through a growing window and a Poisson process, simulates the model
families for which those bounds are certified, and estimates the same
distances empirically.
"""
from .bounds import (
    BoundInputs,
    BoundReport,
    Theorem,
    bound_2_10,
    bound_2_11,
    bound_thm_2D,
    bound_thm_2G,
    bound_thm_2I,
    bound_thm_2K,
    evaluate_bound,
    optimize_parameters,
    rate_exponent,
)
from .density import (
    KernelSpec,
    bound_thm_3A,
    bound_thm_3C,
    estimate_density_at_zero,
    mc_density_experiment,
    triangular_kernel,
    uniform_kernel,
)
from .geometry import Box, GridSpec, Mu2Kind, SpaceConfig, StretchSchedule, build_grid
from .lrdtest import TestConfig, calibrate_critical_value, nn_statistic, run_test, smooth_indicator
from .metrics import (
    PointPattern,
    d0,
    d1,
    dtv_to_poisson,
    empirical_d2,
    empirical_dbw,
    empirical_dtv,
    exact_dtv_pmf,
)
from .models import (
    ClusterBounded,
    ConditionCertificate,
    DensitySpec,
    HomogeneousPoisson,
    InhomogeneousPoisson,
    MarkovModulated,
    MixingKind,
    ProcessModel,
    certificate_for,
    sample,
    verify_orderliness,
)
from .stein import bound_prop_AC, bound_thm_AA, bound_thm_AD, stats_by_enumeration

__version__ = "0.1.0"

__all__ = [
    "BoundInputs", "BoundReport", "Theorem", "bound_2_10", "bound_2_11", "bound_thm_2D", "bound_thm_2G",
    "bound_thm_2I", "bound_thm_2K", "evaluate_bound", "optimize_parameters", "rate_exponent",
    "KernelSpec", "bound_thm_3A", "bound_thm_3C", "estimate_density_at_zero", "mc_density_experiment",
    "triangular_kernel", "uniform_kernel",
    "Box", "GridSpec", "Mu2Kind", "SpaceConfig", "StretchSchedule", "build_grid",
    "TestConfig", "calibrate_critical_value", "nn_statistic", "run_test", "smooth_indicator",
    "PointPattern", "d0", "d1", "dtv_to_poisson", "empirical_d2", "empirical_dbw", "empirical_dtv", "exact_dtv_pmf",
    "ClusterBounded", "ConditionCertificate", "DensitySpec", "HomogeneousPoisson", "InhomogeneousPoisson",
    "MarkovModulated", "MixingKind", "ProcessModel", "certificate_for", "sample", "verify_orderliness",
    "bound_prop_AC", "bound_thm_AA", "bound_thm_AD", "stats_by_enumeration",
]
