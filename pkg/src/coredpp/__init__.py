"""Coreset-based approximate sampling for fixed-size determinantal point
processes, with exact samplers and enumeration-grade diagnostics."""

from .baselines import (
    ChainState,
    McmcRun,
    initial_chain_state,
    kpp_baseline,
    mcmc_kdpp_step,
    mcmc_sample_until_converged,
    psrf,
)
from .coreset import (
    CoreModel,
    Coreset,
    Partition,
    assignment_score,
    build_core_model,
    construct,
    core_swap_objective,
    exact_assignment_score,
    kmeanspp_init,
    nearest_cores,
    random_init,
    rescaled_core_kernel,
)
from .datagen import SyntheticSpec, cluster_labels, gen_synthetic, load_points, save_points
from .diagnostics import (
    DiagnosticsReport,
    RatioEnvelope,
    determinant_ratio_envelope,
    distortion_bound,
    distortion_exact,
    evaluate_model,
    min_complement_distance,
    nonsingularity_prob,
    part_diameter,
    tv_bound,
    tv_empirical,
    tv_exact,
)
from .kdpp import KDppModel, build_kdpp, kdpp_prob, kdpp_sample
from .kernels import (
    KernelMatrix,
    PointSet,
    Spectrum,
    eigendecompose,
    elementary_symmetric,
    kernel_distance,
    linear_kernel,
    median_heuristic_bandwidth,
    principal_minor_det,
    rbf_kernel,
    schur_condition,
)
from .modelio import load_core_model, save_core_model
from .sampler import CoreSample, core_replace, coredpp_prob, coredpp_sample
from .seeding import child_rng, make_rng

__version__ = "0.1.0"

__all__ = [
    "ChainState", "CoreModel", "CoreSample", "Coreset", "DiagnosticsReport",
    "KDppModel", "KernelMatrix", "McmcRun", "Partition", "PointSet",
    "RatioEnvelope", "Spectrum", "SyntheticSpec",
    "assignment_score", "build_core_model", "build_kdpp", "child_rng",
    "cluster_labels", "construct", "core_replace", "core_swap_objective",
    "coredpp_prob", "coredpp_sample", "determinant_ratio_envelope",
    "distortion_bound", "distortion_exact", "eigendecompose",
    "elementary_symmetric", "evaluate_model", "exact_assignment_score",
    "gen_synthetic", "initial_chain_state", "kdpp_prob", "kdpp_sample",
    "kernel_distance", "kmeanspp_init", "kpp_baseline", "linear_kernel",
    "load_core_model", "load_points", "make_rng", "mcmc_kdpp_step",
    "mcmc_sample_until_converged", "median_heuristic_bandwidth",
    "min_complement_distance", "nearest_cores", "nonsingularity_prob",
    "part_diameter", "principal_minor_det", "psrf", "random_init",
    "rbf_kernel", "rescaled_core_kernel", "save_core_model", "save_points",
    "schur_condition", "tv_bound", "tv_empirical", "tv_exact",
]
