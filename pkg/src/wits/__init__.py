"""Witness two-sample testing toolkit.

A two-stage procedure: Stage I learns a one-dimensional witness function
on a training split (MMD witness, exact regularized KFDA, or the scalable
Nystrom/CG approximation), Stage II tests the difference of witness means
on held-out data with analytic or permutation thresholds.  Boot-style
baselines permuting the full data and a Monte-Carlo power harness are
included.
"""

from .benchmark import (
    ExperimentConfig,
    PowerEstimate,
    SweepRow,
    estimate_rejection_rate,
    run_single_trial,
    sweep,
    write_results_csv,
)
from .datasets import (
    SplitData,
    TwoSample,
    blobs_liu,
    blobs_rotated,
    load_csv,
    split,
    subsample_without_replacement,
)
from .errors import ConfigError, DataError, NumericalError
from .falkon import (
    FalkonConfig,
    FalkonResult,
    fda_falkon,
    falkon_preconditioner,
    kfda_witness_nystrom,
    select_centers,
)
from .kernels import (
    Kernel,
    bandwidth_grid,
    eval_kernel,
    gram_matrix,
    median_heuristic_bandwidth,
)
from .mmd import (
    h_gram,
    j_criterion,
    mmd_u_statistic,
    mmd_v_statistic,
    sigma_h1_squared,
)
from .model_selection import (
    CvReport,
    ParamGrid,
    default_param_grid,
    grid_search_cv,
    kfold_split,
    select_kernel_by_j,
)
from .testing import (
    TestOutcome,
    asymptotic_power,
    asymptotic_witness_test,
    gaussian_quantile,
    kfda_boot_test,
    mmd_boot_test,
    normal_cdf,
    permutation_witness_test,
    standardized_tau,
)
from .witness import (
    SplitRatio,
    WitnessModel,
    build_centering,
    empirical_snr,
    evaluate_witness,
    kfda_witness_exact,
    mmd_witness,
)

__version__ = "0.1.0"

__all__ = [
    "Kernel", "eval_kernel", "gram_matrix", "bandwidth_grid",
    "median_heuristic_bandwidth",
    "h_gram", "mmd_v_statistic", "mmd_u_statistic", "sigma_h1_squared",
    "j_criterion",
    "WitnessModel", "SplitRatio", "mmd_witness", "build_centering",
    "kfda_witness_exact", "evaluate_witness", "empirical_snr",
    "FalkonConfig", "FalkonResult", "select_centers", "falkon_preconditioner",
    "fda_falkon", "kfda_witness_nystrom",
    "TestOutcome", "normal_cdf", "gaussian_quantile", "standardized_tau",
    "asymptotic_witness_test", "permutation_witness_test", "asymptotic_power",
    "mmd_boot_test", "kfda_boot_test",
    "ParamGrid", "CvReport", "default_param_grid", "kfold_split",
    "grid_search_cv", "select_kernel_by_j",
    "TwoSample", "SplitData", "blobs_rotated", "blobs_liu", "load_csv",
    "subsample_without_replacement", "split",
    "ExperimentConfig", "PowerEstimate", "SweepRow", "run_single_trial",
    "estimate_rejection_rate", "sweep", "write_results_csv",
    "ConfigError", "DataError", "NumericalError",
    "__version__",
]
