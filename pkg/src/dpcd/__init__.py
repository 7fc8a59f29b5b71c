"""Differentially private coordinate descent for composite ERM.

Library surface: data handling (`data`), composite objectives
(`objective`), proximal operators (`prox`), RDP accounting and noise
calibration (`privacy`), the DP-CD / DP-SGD solvers (`solvers`), private
smoothness estimation (`estimation`) and the experiment harness
(`harness`).
"""

__version__ = "0.1.0"

from .data import Dataset, FeatureBounds, StandardizationParams, feature_bounds, \
    generate_sparse_lasso, load_csv, save_csv, standardize
from .estimation import default_bounds, per_sample_smoothness, private_smoothness
from .harness import ExperimentSpec, HyperGrid, RunReport, TuningFailure, \
    build_problem, default_grid, relative_error, run_experiment, \
    strongly_convex_fixture, tune
from .objective import LossKind, Problem, Regularizer, ResidualState, \
    UnboundedLipschitz, evaluate, grad_coord, lipschitz_constants, residual_state, \
    smoothness_constants, update_state
from .privacy import AccountantAudit, CalibrationFailure, HypothesisViolation, \
    InfinitePrivacyLoss, NoiseScales, PrivacyBudget, RdpCurve, \
    calibrate_dpcd_closed_form, calibrate_dpcd_numeric, calibrate_dpsgd_numeric, \
    calibrate_numeric, compose, default_alpha_grid, gaussian_sample, laplace_sample, \
    rdp_gaussian, rdp_subsampled_gaussian, rdp_to_dp
from .prox import apply_prox, apply_prox_vector
from .solvers import ReferenceSolution, Solution, SolverConfig, clip_scalar, \
    clipped_grad_coord, coordinate_thresholds, dp_cd, dp_sgd, global_smoothness, \
    reference_solve

__all__ = [
    "AccountantAudit", "CalibrationFailure", "Dataset", "ExperimentSpec",
    "FeatureBounds", "HyperGrid", "HypothesisViolation", "InfinitePrivacyLoss",
    "LossKind", "NoiseScales", "PrivacyBudget", "Problem", "RdpCurve",
    "ReferenceSolution", "Regularizer", "ResidualState", "RunReport", "Solution",
    "SolverConfig", "StandardizationParams", "TuningFailure", "UnboundedLipschitz",
    "apply_prox", "apply_prox_vector", "build_problem",
    "calibrate_dpcd_closed_form", "calibrate_dpcd_numeric",
    "calibrate_dpsgd_numeric", "calibrate_numeric", "clip_scalar",
    "clipped_grad_coord", "compose", "coordinate_thresholds", "default_alpha_grid",
    "default_bounds", "default_grid", "dp_cd", "dp_sgd", "evaluate",
    "feature_bounds", "gaussian_sample", "generate_sparse_lasso",
    "global_smoothness", "grad_coord", "laplace_sample", "lipschitz_constants",
    "load_csv", "per_sample_smoothness", "private_smoothness", "rdp_gaussian",
    "rdp_subsampled_gaussian", "rdp_to_dp", "reference_solve", "relative_error",
    "residual_state", "run_experiment", "save_csv", "smoothness_constants",
    "standardize", "strongly_convex_fixture", "tune", "update_state",
]
