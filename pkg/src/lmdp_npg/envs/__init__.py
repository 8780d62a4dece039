from .secretary import (
    SpConfig,
    SecretaryInstance,
    SecretarySpec,
    ThresholdPolicy,
    sp_generate_distribution,
    sp_optimal_policy_dp,
    sp_threshold_visitation,
    naive_visitation,
)
from .knapsack import (
    OkdConfig,
    GranularDistribution,
    PointMassDistribution,
    KnapsackInstance,
    OkdSpec,
    BangPerBuckPolicy,
    okd_sample_distribution,
    okd_bang_per_buck_reference,
    okd_policy_value_mc,
)

__all__ = [
    "SpConfig",
    "SecretaryInstance",
    "SecretarySpec",
    "ThresholdPolicy",
    "sp_generate_distribution",
    "sp_optimal_policy_dp",
    "sp_threshold_visitation",
    "naive_visitation",
    "OkdConfig",
    "GranularDistribution",
    "PointMassDistribution",
    "KnapsackInstance",
    "OkdSpec",
    "BangPerBuckPolicy",
    "okd_sample_distribution",
    "okd_bang_per_buck_reference",
    "okd_policy_value_mc",
]
