"""Density-aware core-set selection with coverage-bound diagnostics.

Select representative subsets of a dataset for labeling by trading off how
far points are from their nearest selected representative (classical
k-center coverage) against how densely populated each representative's
neighborhood is.  The package provides the selection algorithms, the
coverage geometry and bound reports that motivate them, several density
estimators, a calibration harness relating density to coverage, and a small
CLI for running file-based experiments.
"""

from .coverage import (
    BoundParams,
    BoundReport,
    CoverageAssignment,
    assign_coverage,
    average_radial_distance,
    all_radial_distances,
    bound_report,
    brute_force_k_center,
    classical_radius,
    hoeffding_term,
)
from .data import (
    FeatureGrid,
    GeneratorSpec,
    LabeledPointSet,
    PointSet,
    ValidationError,
    distance,
    generate,
    load_pointset,
    normalize,
    pairwise_distances,
    save_pointset,
)
from .density import (
    DEFAULT_BETA,
    DEFAULT_TAU,
    CalibrationReport,
    DensityField,
    MaskedReconstructor,
    calibrate,
    density_from_error,
    estimator_from_config,
    grid_density,
    kernel_density,
    knn_density,
    masked_reconstruction_error,
    normalize_errors_minmax,
)
from .evaluation import (
    COMPARISON_ESTIMATOR,
    ComparisonReport,
    PluginLearner,
    compare_algorithms,
    core_set_loss,
    nonuniform_mixture_spec,
    uniform_box_spec,
    verify_bound_ordering,
)
from .rng import PortableRng
from .selection import (
    ProtocolConfig,
    ProtocolResult,
    ScoreMap,
    SelectionState,
    density_aware_greedy,
    filter_candidates,
    k_center_greedy,
    margin_score,
    run_rounds,
    uncertainty_select,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BoundParams",
    "BoundReport",
    "COMPARISON_ESTIMATOR",
    "CalibrationReport",
    "ComparisonReport",
    "CoverageAssignment",
    "DensityField",
    "FeatureGrid",
    "GeneratorSpec",
    "LabeledPointSet",
    "MaskedReconstructor",
    "PluginLearner",
    "PointSet",
    "PortableRng",
    "ProtocolConfig",
    "ProtocolResult",
    "ScoreMap",
    "SelectionState",
    "ValidationError",
    "DEFAULT_BETA",
    "DEFAULT_TAU",
    "assign_coverage",
    "average_radial_distance",
    "all_radial_distances",
    "bound_report",
    "brute_force_k_center",
    "calibrate",
    "classical_radius",
    "compare_algorithms",
    "core_set_loss",
    "density_aware_greedy",
    "density_from_error",
    "distance",
    "estimator_from_config",
    "filter_candidates",
    "generate",
    "grid_density",
    "hoeffding_term",
    "k_center_greedy",
    "kernel_density",
    "knn_density",
    "load_pointset",
    "margin_score",
    "masked_reconstruction_error",
    "nonuniform_mixture_spec",
    "normalize",
    "normalize_errors_minmax",
    "pairwise_distances",
    "run_rounds",
    "save_pointset",
    "uncertainty_select",
    "uniform_box_spec",
    "verify_bound_ordering",
]
