"""Workload estimation from asynchronous driving signals.

Two estimators share one data model. The instantaneous side runs a
two-state Bayesian filter over per-channel likelihood tables learned by
kernel density estimation, with transition matrices that can follow road
context or a driver's profile. The long-term side classifies whole journeys
into workload profiles from random-kernel window features fused by a
sequence filter. A simulator with known latent truth backs the tests and
experiments.
"""

from .errors import (
    DriveloadError,
    InsufficientDataError,
    InvariantViolation,
    ParseError,
)
from .filtering import (
    AWP_PRESETS,
    NORMALIZATION_TOL,
    ROAD_PRESETS,
    ContextPolicy,
    FilterState,
    TransitionMatrix,
    WorkloadPosterior,
    builtin_matrices,
    decide,
    fixed_policy,
    init_filter,
    policy_from_awp,
    policy_from_road_types,
    run_filter,
    step,
)
from .journey import (
    ChannelSample,
    ChannelSchema,
    ContextAnnotation,
    Journey,
    PromptEvent,
    default_schema,
    derive_rate_channels,
    read_journey,
    validate_journey,
    write_journey,
)
from .labeling import (
    AWP_CLASSES,
    HIGH,
    LOW,
    LabelWindow,
    LabeledInstant,
    attach_presses,
    awp_from_lwr,
    expand_labels,
    label_prompts,
    lwr,
    window_spans,
)
from .likelihood import (
    KdeConfig,
    LikelihoodTable,
    eval_likelihood,
    eval_table,
    fit_kde,
    read_table,
    read_tables,
    table_filename,
    write_table,
    silverman_bandwidth,
    train_likelihoods,
    write_tables,
)
from .metrics import (
    BinaryMetrics,
    ComparisonReport,
    ConfusionMatrix,
    RocCurve,
    best_f1_threshold,
    binary_metrics,
    compare_policies,
    labeled_filter_scores,
    macro_f1,
    roc,
)
from .profiling import (
    GRID_HZ,
    KernelBank,
    ProfilingReport,
    RobustScaleParams,
    Window,
    apply_scale,
    build_kernel_bank,
    decide_awp,
    fit_bank_biases,
    fit_robust_scale,
    preprocess,
    sample_grid,
    slice_windows,
    run_profiling,
    score_windows,
    sequence_filter,
    train_classifier,
    transform,
    transform_many,
)
from .simulator import (
    TICK_HZ,
    DriverStyle,
    EmissionModel,
    GaussianMixture,
    SimConfig,
    TruthTrack,
    class_emission_model,
    default_styles,
    make_emission_model,
    read_truth,
    road_cycle,
    simulate_journey,
    simulate_population,
    write_truth,
)

__version__ = "0.1.0"

__all__ = [
    "AWP_CLASSES",
    "AWP_PRESETS",
    "BinaryMetrics",
    "ChannelSample",
    "ChannelSchema",
    "ComparisonReport",
    "ConfusionMatrix",
    "ContextAnnotation",
    "ContextPolicy",
    "DriveloadError",
    "DriverStyle",
    "EmissionModel",
    "FilterState",
    "GRID_HZ",
    "GaussianMixture",
    "HIGH",
    "InsufficientDataError",
    "InvariantViolation",
    "Journey",
    "KdeConfig",
    "KernelBank",
    "LOW",
    "LabelWindow",
    "LabeledInstant",
    "LikelihoodTable",
    "NORMALIZATION_TOL",
    "ParseError",
    "ProfilingReport",
    "PromptEvent",
    "ROAD_PRESETS",
    "RobustScaleParams",
    "RocCurve",
    "SimConfig",
    "TICK_HZ",
    "TransitionMatrix",
    "TruthTrack",
    "Window",
    "WorkloadPosterior",
    "apply_scale",
    "attach_presses",
    "awp_from_lwr",
    "best_f1_threshold",
    "binary_metrics",
    "build_kernel_bank",
    "builtin_matrices",
    "class_emission_model",
    "compare_policies",
    "decide",
    "decide_awp",
    "default_schema",
    "default_styles",
    "derive_rate_channels",
    "eval_likelihood",
    "eval_table",
    "expand_labels",
    "fit_bank_biases",
    "fit_kde",
    "fit_robust_scale",
    "fixed_policy",
    "init_filter",
    "label_prompts",
    "labeled_filter_scores",
    "lwr",
    "macro_f1",
    "make_emission_model",
    "policy_from_awp",
    "policy_from_road_types",
    "preprocess",
    "read_journey",
    "read_table",
    "read_tables",
    "read_truth",
    "road_cycle",
    "roc",
    "run_filter",
    "run_profiling",
    "sample_grid",
    "score_windows",
    "sequence_filter",
    "silverman_bandwidth",
    "simulate_journey",
    "simulate_population",
    "slice_windows",
    "step",
    "table_filename",
    "train_classifier",
    "train_likelihoods",
    "transform",
    "transform_many",
    "validate_journey",
    "window_spans",
    "write_journey",
    "write_table",
    "write_tables",
    "write_truth",
]
