"""Simulation, Monte Carlo limit constants and extreme-value diagnostics for
generalized Ornstein-Uhlenbeck volatility models and their integrated
increments."""

from .errors import (
    BoundaryAlpha,
    DomainError,
    EstimationUnstable,
    EstimationWarning,
    GenouError,
    InsufficientData,
    InvalidConfig,
    MissingArtifact,
    NoExceedances,
    NonPositiveData,
    NoPositiveRoot,
    NotStationaryHeavyTail,
    ParseError,
    PreconditionViolated,
    TooFewExceedances,
    TruncationWarning,
    ValidationError,
)
from .models import (
    BrownianExponent,
    CogarchCPP,
    ConditionReport,
    DeterministicAbs,
    EventPath,
    Gaussian,
    GridPath,
    JumpLaw,
    LevyModel,
    Nelson,
    TwoPoint,
    check_conditions,
    find_alpha,
    laplace_exponent,
    mean_exponent,
    model_hash,
    model_id,
    simulate_xi_events,
    simulate_xi_grid,
    symmetric_driver,
)
from .simulate import (
    RecurrenceCoeffs,
    SkeletonSeries,
    default_burn_in,
    read_series_csv,
    recurrence_coeff_batch,
    sample_recurrence_coeffs,
    simulate_blocks,
    simulate_integrated,
    simulate_skeleton,
    stationary_init,
    write_series_csv,
)
from .constants import (
    IdentityCheck,
    TheoryConstant,
    check_first_jump_identity,
    check_window_scaling_identity,
    extremal_index_increments,
    extremal_index_volatility,
    first_jump_laplace,
    frechet_constant,
    mc_sup_exponent,
    normalizer_a_n,
    tail_constant_increments,
    tail_scale,
    truncation_horizon,
    write_constants_csv,
)
from .stats import (
    AcfEstimate,
    ClusterDistribution,
    ExtremalIndexEstimate,
    IntegratedLimitReport,
    MaximaCheck,
    RateRegression,
    TailEstimate,
    cluster_size_distribution,
    extremal_index_blocks,
    extremal_index_runs,
    frechet_cdf,
    hill_estimator,
    hill_profile,
    integrated_limit_check,
    partial_maxima_check,
    rate_diagnostic,
    sample_acv,
    tail_ratio,
)
from .config import ExperimentConfig, parse_config, serialize_config
from .experiment import ExperimentReport, ReportRow, run_experiment, write_report_csv
from .plots import PlotRecord, emit_plots

__version__ = "0.1.0"
