"""Trimmed group l1 and truncated nuclear norm penalties with exact-penalty tooling."""

from .errors import CapabilityError, InputError, SizeError, TLXError, VerificationError
from .experiment import ExperimentConfig, ExperimentRow, run_experiment
from .penalty import (
    largest_k_norm,
    numeric_dir_deriv,
    trimmed_l1_dir_deriv,
    trimmed_l1_value,
    truncated_nuclear_value,
    truncated_shrink_direction,
)
from .problems import generate_instance, make_problem
from .prox import SeparableAddon, prox_bruteforce, prox_trimmed_l1, prox_truncated_nuclear
from .solvers import SolverConfig, SolveReport, solve, solve_dca, solve_padmm, solve_pgm, solve_sparsa
from .stationarity import counterexample_report, dstationarity_residual, local_opt_sample_check
from .thresholds import ThresholdCertificate, certify, select_gamma, sigma_kmp, threshold_catalog

__all__ = [
    "CapabilityError", "InputError", "SizeError", "TLXError", "VerificationError",
    "ExperimentConfig", "ExperimentRow", "run_experiment",
    "largest_k_norm", "numeric_dir_deriv", "trimmed_l1_dir_deriv", "trimmed_l1_value",
    "truncated_nuclear_value", "truncated_shrink_direction",
    "generate_instance", "make_problem",
    "SeparableAddon", "prox_bruteforce", "prox_trimmed_l1", "prox_truncated_nuclear",
    "SolverConfig", "SolveReport", "solve", "solve_dca", "solve_padmm", "solve_pgm", "solve_sparsa",
    "counterexample_report", "dstationarity_residual", "local_opt_sample_check",
    "ThresholdCertificate", "certify", "select_gamma", "sigma_kmp", "threshold_catalog",
]
