"""l0-penalized weighted least squares for censored AFT regression."""
from ._kernels import BACKEND
from .asdar import Criterion, TuningConfig, TuningPath, asdar_path, cross_validate, hbic_score
from .sdar import (
    HardThresholdRule,
    SdarConfig,
    SdarFit,
    Termination,
    hard_threshold,
    kkt_residual,
    sdar_fit,
    select_active_set,
    solve_active_least_squares,
    update_dual,
)
from .simgen import ScenarioSpec, SimulatedInstance, gen_instance
from .survival_data import (
    KMWeights,
    SortedSample,
    StandardizedDesign,
    SurvivalDataset,
    build_standardized_design,
    coefficients_to_original_scale,
    kaplan_meier_weights,
    prepare_design,
    sort_by_observed_time,
)

__version__ = "0.1.0"
