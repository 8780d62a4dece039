"""Policy optimization toolkit for latent-MDP formulations of online
combinatorial selection problems (secretary, online knapsack decision
version): sample-based natural policy gradient with pluggable samplers,
curriculum training schemes, and condition-number / fitting-error
diagnostics backed by exact enumeration oracles."""

from .core import (
    ACCEPT,
    REJECT,
    DEFAULT_ENUMERATION_CAP,
    ExplicitLatentMdp,
    InstanceTooLargeError,
    LatentMdpSpec,
    Trajectory,
    advantage_exact,
    conditional_advantage_tables,
    evaluate_value_exact,
    evaluate_value_mc,
    policy_gradient_exact,
    visitation_distribution,
)
from .policies import (
    FeatureMap,
    LogLinearPolicy,
    NaiveRandomPolicy,
    OkdPolyFeatures,
    OneHotFeatures,
    OneHotPolicy,
    ParameterOverflowError,
    SpPolyFeatures,
    build_features,
    feature_norm_bound,
)
from .envs import (
    BangPerBuckPolicy,
    GranularDistribution,
    OkdConfig,
    OkdSpec,
    PointMassDistribution,
    SecretarySpec,
    SpConfig,
    ThresholdPolicy,
    okd_bang_per_buck_reference,
    okd_policy_value_mc,
    okd_sample_distribution,
    sp_generate_distribution,
    sp_optimal_policy_dp,
)
from .solver import quadratic_objective, solve_constrained_quadratic
from .training import (
    AdvantageSample,
    FisherAndGradientEstimate,
    TrainConfig,
    TrainLog,
    TrainResult,
    TrainingDivergedError,
    advantage_bound,
    estimate_fisher_and_gradient,
    npg_train,
    sample_advantage,
)
from .curriculum import (
    SCHEMES,
    CurriculumConfig,
    CurriculumConfigError,
    SchemeResult,
    generate_curriculum,
    run_scheme,
)
from .analysis import (
    KappaClosedForm,
    KappaReport,
    decayed_average,
    fitting_error,
    generic_fisher_exact,
    generic_fisher_mc,
    kappa_closed_form_sp,
    kappa_empirical,
    kappa_from_sigmas,
    optimal_threshold_from_series,
)

__version__ = "0.1.0"
