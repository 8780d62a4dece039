"""Two-phase curriculum training and the named scheme matrix.

A curriculum run first trains from scratch on an easier instance of the same
problem family (smaller n, scale-invariant encoding), then either

* keeps the warm-up policy as a *fixed sampler* whose visited states, paired
  with uniform actions, drive the final-phase fit while the final policy
  restarts from zero parameters (``fix_samp_curl``), or
* continues training the warm-up parameters on-policy (``curl``).

Single-phase baselines train directly on the target instance, either
on-policy (``direct``) or with the coin-flip sampler (``naive_samp``).  The
``_reg`` variants add entropy regularization to every phase, and
``reference`` skips training entirely and returns the environment's reference
policy.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .core import LatentMdpSpec, Policy
from .envs.knapsack import OkdConfig, okd_sample_distribution, GranularDistribution
from .envs.secretary import SpConfig, sp_generate_distribution
from .policies import FeatureMap, LogLinearPolicy, NaiveRandomPolicy
from .training import TrainConfig, TrainLog, TrainResult, npg_train

SCHEMES = (
    "fix_samp_curl",
    "fix_samp_curl_reg",
    "direct",
    "direct_reg",
    "naive_samp",
    "naive_samp_reg",
    "curl",
    "curl_reg",
    "reference",
)

WARMUP_PHASE = 0
FINAL_PHASE = 1


class CurriculumConfigError(ValueError):
    pass


@dataclass
class CurriculumConfig:
    final_spec: LatentMdpSpec
    features: FeatureMap
    train: TrainConfig
    warmup_spec: LatentMdpSpec | None = None
    lam_reg: float = 0.01
    warmup_episodes: int | None = None  # defaults to the shared episode count
    warmup_batch: int | None = None
    reference_policy: Policy | None = None
    # metrics_factory(phase, spec, sampler, lam) -> metrics_fn for npg_train
    metrics_factory: object = None

    def needs_warmup(self, scheme: str) -> bool:
        return scheme.startswith(("fix_samp_curl", "curl"))

    def validate(self, scheme: str) -> None:
        if scheme not in SCHEMES:
            raise CurriculumConfigError(f"unknown scheme: {scheme}")
        if self.needs_warmup(scheme):
            if self.warmup_spec is None:
                raise CurriculumConfigError(f"{scheme} requires a warm-up environment")
            if type(self.warmup_spec) is not type(self.final_spec):
                raise CurriculumConfigError(
                    "warm-up and final environments must share the observation encoding"
                )
        if scheme == "reference" and self.reference_policy is None:
            raise CurriculumConfigError("reference scheme requires a reference policy")


@dataclass
class SchemeResult:
    scheme: str
    policy: Policy
    logs: list[TrainLog] = field(default_factory=list)
    warmup_policy: Policy | None = None


def scheme_recipe(scheme: str, lam_reg: float) -> dict:
    """(sampler kind, warm-up use, lam) triple encoded by the scheme name."""
    base = scheme[: -len("_reg")] if scheme.endswith("_reg") else scheme
    lam = lam_reg if scheme.endswith("_reg") else 0.0
    return {
        "fix_samp_curl": {"warmup": True, "final_sampler": "warmup_policy", "final_init": "zero", "lam": lam},
        "direct": {"warmup": False, "final_sampler": None, "final_init": "zero", "lam": lam},
        "naive_samp": {"warmup": False, "final_sampler": "naive", "final_init": "zero", "lam": lam},
        "curl": {"warmup": True, "final_sampler": None, "final_init": "warmup_theta", "lam": lam},
        "reference": {"warmup": False, "final_sampler": None, "final_init": "zero", "lam": lam},
    }[base]


def run_scheme(scheme: str, cfg: CurriculumConfig) -> SchemeResult:
    cfg.validate(scheme)
    if scheme == "reference":
        return SchemeResult(scheme, cfg.reference_policy)

    recipe = scheme_recipe(scheme, cfg.lam_reg)
    lam = recipe["lam"]
    policy0 = LogLinearPolicy(cfg.features)
    logs: list[TrainLog] = []
    warmup_policy = None
    sample_offset = 0

    if recipe["warmup"]:
        warm_cfg = replace(
            cfg.train,
            lam=lam,
            sampler=None,
            init_theta=None,
            episodes=cfg.warmup_episodes if cfg.warmup_episodes is not None else cfg.train.episodes,
            batch=cfg.warmup_batch if cfg.warmup_batch is not None else cfg.train.batch,
        )
        metrics = _metrics(cfg, WARMUP_PHASE, cfg.warmup_spec, None, lam)
        warm = npg_train(
            cfg.warmup_spec, policy0, warm_cfg, metrics_fn=metrics,
            phase=WARMUP_PHASE, mode=f"{scheme}/warmup",
        )
        warmup_policy = warm.policy
        logs.append(warm.log)
        sample_offset = warm_cfg.episodes * warm_cfg.batch * cfg.warmup_spec.horizon

    sampler = recipe["final_sampler"]
    if sampler == "warmup_policy":
        sampler = warmup_policy
    elif sampler == "naive":
        sampler = NaiveRandomPolicy()
    init_theta = warmup_policy.theta if recipe["final_init"] == "warmup_theta" else None

    final_cfg = replace(cfg.train, lam=lam, sampler=sampler, init_theta=init_theta)
    metrics = _metrics(cfg, FINAL_PHASE, cfg.final_spec, sampler, lam)
    final = npg_train(
        cfg.final_spec, policy0, final_cfg, metrics_fn=metrics,
        phase=FINAL_PHASE, mode=f"{scheme}/final", sample_offset=sample_offset,
    )
    logs.append(final.log)
    return SchemeResult(scheme, final.policy, logs, warmup_policy)


def _metrics(cfg: CurriculumConfig, phase: int, spec, sampler, lam):
    if cfg.metrics_factory is None:
        return None
    return cfg.metrics_factory(phase, spec, sampler, lam)


def generate_curriculum(final_config, warmup_n: int, seed, target_ratio_shrink: float = 0.5):
    """An easier instance of the same family, drawn independently of the target.

    Secretary: a fresh seeded indicator series of length ``warmup_n``
    (classical stays classical).  Knapsack: the budget keeps the same
    per-item scale (budget/n preserved) while the target-to-budget ratio
    shrinks, making the reward condition easier to trigger; fresh seeded item
    distributions of the same granularity.
    """
    if isinstance(final_config, SpConfig):
        if warmup_n >= final_config.n:
            raise ValueError("warm-up must be smaller than the final instance")
        if final_config.classical:
            return sp_generate_distribution(warmup_n, seed, classical=True)
        return sp_generate_distribution(warmup_n, seed)
    if isinstance(final_config, OkdConfig):
        if warmup_n >= final_config.n:
            raise ValueError("warm-up must be smaller than the final instance")
        if not 0.0 < target_ratio_shrink < 1.0:
            raise ValueError("target_ratio_shrink must lie in (0, 1)")
        scale = warmup_n / final_config.n
        return OkdConfig(
            n=warmup_n,
            budget=final_config.budget * scale,
            target=final_config.target * scale * target_ratio_shrink,
            value_dist=_fresh_dist(final_config.value_dist, (seed, "value")),
            size_dist=_fresh_dist(final_config.size_dist, (seed, "size")),
            seed=None,
        )
    raise TypeError(f"unsupported environment config: {type(final_config).__name__}")


def _fresh_dist(dist, seed):
    if isinstance(dist, GranularDistribution) and dist.gran > 1:
        return okd_sample_distribution(dist.gran, seed)
    return dist  # uniform or finite-support distributions carry over unchanged
