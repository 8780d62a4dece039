"""Experiment orchestration: JSON configs, per-scheme runs, CSV/checkpoint
output, the run manifest, and the environment/reference wiring shared by the
CLI and the demo scripts.

Environment configs are serialized as::

    {"env": "sp"|"okd", "n": int, "seed": int, "classical": bool,
     "gran": int, "budget": float, "target": float}

The indicator series / bin weights are always re-derived from the seed, never
stored.  Checkpoints are JSON with the feature description, the flat
parameter vector at full precision, and (seed, iteration) metadata.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .analysis import fitting_error, kappa_empirical
from .core import evaluate_value_mc
from .curriculum import (
    FINAL_PHASE,
    SCHEMES,
    WARMUP_PHASE,
    CurriculumConfig,
    SchemeResult,
    generate_curriculum,
    run_scheme,
)
from .envs.knapsack import OkdConfig, OkdSpec, okd_bang_per_buck_reference, okd_sample_distribution
from .envs.secretary import SecretarySpec, SpConfig, sp_generate_distribution, sp_optimal_policy_dp
from .policies import LogLinearPolicy, OkdPolyFeatures, SpPolyFeatures, build_features
from .rng import stream_key
from .training import TrainConfig, TrainLog

CURRICULUM_SCHEMES = tuple(s for s in SCHEMES if s.startswith(("curl", "fix_samp_curl")))


# ---------------------------------------------------------------------------
# environment config (de)serialization
# ---------------------------------------------------------------------------


def env_config_from_dict(d: dict):
    kind = d.get("env")
    if kind == "sp":
        if d.get("classical", False):
            return sp_generate_distribution(int(d["n"]), d.get("seed"), classical=True)
        return sp_generate_distribution(int(d["n"]), int(d["seed"]))
    if kind == "okd":
        gran = int(d.get("gran", 1))
        seed = d.get("seed", 0)
        if gran > 1:
            value_dist = okd_sample_distribution(gran, (seed, "value"))
            size_dist = okd_sample_distribution(gran, (seed, "size"))
        else:
            value_dist = size_dist = None
        return OkdConfig(
            n=int(d["n"]),
            budget=float(d["budget"]),
            target=float(d["target"]),
            value_dist=value_dist,
            size_dist=size_dist,
            seed=seed,
        )
    raise ValueError(f'env must be "sp" or "okd", got {kind!r}')


def env_config_to_dict(config) -> dict:
    if isinstance(config, SpConfig):
        return {"env": "sp", "n": config.n, "seed": config.seed, "classical": config.classical}
    if isinstance(config, OkdConfig):
        gran = getattr(config.value_dist, "gran", 1)
        return {
            "env": "okd",
            "n": config.n,
            "seed": config.seed,
            "gran": gran,
            "budget": config.budget,
            "target": config.target,
        }
    raise TypeError(type(config).__name__)


def make_spec(config):
    if isinstance(config, SpConfig):
        return SecretarySpec(config)
    if isinstance(config, OkdConfig):
        return OkdSpec(config)
    raise TypeError(type(config).__name__)


def default_features(config, d0: int | None = None):
    if isinstance(config, SpConfig):
        return SpPolyFeatures(4 if d0 is None else d0)
    return OkdPolyFeatures(3 if d0 is None else d0)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path, policy: LogLinearPolicy, env_dict: dict, seed, iteration: int) -> None:
    payload = {
        "env": env_dict,
        "feature": policy.features.describe(),
        "theta": [float(x) for x in policy.theta],
        "meta": {"seed": seed, "iteration": iteration},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path) -> tuple[LogLinearPolicy, dict, dict]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    feat = payload["feature"]
    observations = None
    if feat["kind"] == "one_hot":
        env = env_config_from_dict(payload["env"])
        observations = make_spec(env).observations()
    features = build_features(feat["kind"], feat["d0"], observations)
    policy = LogLinearPolicy(features, np.asarray(payload["theta"]))
    return policy, payload["env"], payload["meta"]


# ---------------------------------------------------------------------------
# experiment configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    env: dict
    schemes: list[str]
    train: dict = field(default_factory=dict)
    curriculum: dict = field(default_factory=dict)
    seed: int = 0
    name: str = "experiment"
    feature_degree: int | None = None
    eval_episodes: int = 4000
    err_episodes: int = 2000
    kappa_episodes: int = 0  # 0: exact when available, else skip
    checkpoint_every: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown experiment config keys: {sorted(extra)}")
        if "env" not in d or "schemes" not in d:
            raise ValueError("experiment config requires 'env' and 'schemes'")
        bad = [s for s in d["schemes"] if s not in SCHEMES]
        if bad:
            raise ValueError(f"unknown schemes: {bad}; valid: {list(SCHEMES)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def build_train_config(d: dict, seed: int) -> TrainConfig:
    known = {f for f in TrainConfig.__dataclass_fields__}
    extra = set(d) - known - {"warmup_episodes", "warmup_batch", "lam_reg"}
    if extra:
        raise ValueError(f"unknown train config keys: {sorted(extra)}")
    kwargs = {k: v for k, v in d.items() if k in known}
    kwargs.setdefault("seed", seed)
    return TrainConfig(**kwargs)


# ---------------------------------------------------------------------------
# metrics wiring
# ---------------------------------------------------------------------------


@dataclass
class ReferenceBundle:
    policy: object
    value: float
    description: str


def reference_for(config, spec, seed, mc_episodes: int = 20000) -> ReferenceBundle:
    """DP-optimal threshold policy for the secretary problem; tuned
    bang-per-buck policy for the knapsack (a reference, not an optimum)."""
    if isinstance(config, SpConfig):
        opt = sp_optimal_policy_dp(config)
        return ReferenceBundle(opt.policy, opt.value, f"threshold accept_from={opt.accept_from}")
    search = okd_bang_per_buck_reference(config, mc_episodes, (seed, "reference"))
    mean, _ = evaluate_value_mc(spec, search.policy, 0.0, mc_episodes, (seed, "reference-value"))
    return ReferenceBundle(search.policy, mean, f"bang_per_buck r={search.policy.ratio_threshold:.4f}")


class MetricsFactory:
    """Builds the per-phase metrics callback handed to the trainer.

    The secretary environment gets exact rewards, condition numbers and
    fitting errors through the aggregate chain; the knapsack falls back to
    Monte Carlo for all three.
    """

    def __init__(self, experiment: ExperimentConfig, reference_by_phase: dict):
        self.x = experiment
        self.reference_by_phase = reference_by_phase

    def __call__(self, phase, spec, sampler, lam):
        exact = isinstance(spec, SecretarySpec)
        ref = self.reference_by_phase.get(phase)
        x = self.x

        def metrics(t, policy, g):
            out = {}
            if exact:
                out["reward_mean"] = spec.policy_value(policy)
                out["reward_ci95"] = 0.0
            else:
                mean, ci = evaluate_value_mc(
                    spec, policy, 0.0, x.eval_episodes, (x.seed, "eval", phase, t))
                out["reward_mean"], out["reward_ci95"] = mean, ci
            if ref is not None:
                if exact:
                    kappa = kappa_empirical(spec, ref.policy, policy, sampler=sampler)
                    err = fitting_error(spec, ref.policy, policy, g, lam)
                elif x.kappa_episodes > 0:
                    kappa = kappa_empirical(
                        spec, ref.policy, policy, sampler=sampler,
                        mc_episodes=x.kappa_episodes, seed=(x.seed, "kappa", phase, t))
                    from .training import LOG2

                    err = fitting_error(
                        spec, ref.policy, policy, g, lam,
                        mc_episodes=x.err_episodes, seed=(x.seed, "err", phase, t),
                        clip_u=math.inf if lam == 0.0 else x.train.get("clip", LOG2 + 5.0))
                else:
                    kappa = err = None
                if kappa is not None:
                    out["ln_kappa"] = math.log(kappa) if kappa > 0 else -math.inf
                    out["err"] = err
            return out

        return metrics


# ---------------------------------------------------------------------------
# running experiments
# ---------------------------------------------------------------------------


@dataclass
class SchemeOutput:
    scheme: str
    result: SchemeResult
    final_value: float
    final_ci95: float
    csv_path: str | None = None


def run_experiment_scheme(x: ExperimentConfig, scheme: str, out_dir: str | None) -> SchemeOutput:
    final_config = env_config_from_dict(x.env)
    final_spec = make_spec(final_config)
    features = default_features(final_config, x.feature_degree)
    train = build_train_config(x.train, x.seed)

    warmup_spec = None
    warmup_config = None
    if scheme in CURRICULUM_SCHEMES or "warmup_n" in x.curriculum:
        warmup_n = int(x.curriculum.get("warmup_n", max(2, final_config.n // 4)))
        warmup_config = generate_curriculum(
            final_config, warmup_n, (x.seed, "curriculum"),
            x.curriculum.get("target_ratio_shrink", 0.5),
        )
        warmup_spec = make_spec(warmup_config)

    references = {FINAL_PHASE: reference_for(final_config, final_spec, x.seed)}
    if warmup_spec is not None:
        references[WARMUP_PHASE] = reference_for(warmup_config, warmup_spec, x.seed)

    cfg = CurriculumConfig(
        final_spec=final_spec,
        features=features,
        train=train,
        warmup_spec=warmup_spec,
        lam_reg=x.train.get("lam_reg", 0.01),
        warmup_episodes=x.train.get("warmup_episodes"),
        warmup_batch=x.train.get("warmup_batch"),
        reference_policy=references[FINAL_PHASE].policy,
        metrics_factory=MetricsFactory(x, references),
    )
    result = run_scheme(scheme, cfg)

    if isinstance(final_spec, SecretarySpec):
        final_value = final_spec.policy_value(result.policy)
        final_ci = 0.0
    else:
        final_value, final_ci = evaluate_value_mc(
            final_spec, result.policy, 0.0, x.eval_episodes, (x.seed, "final-eval", scheme))

    csv_path = None
    if out_dir is not None:
        scheme_dir = os.path.join(out_dir, scheme)
        os.makedirs(scheme_dir, exist_ok=True)
        csv_path = os.path.join(scheme_dir, "log.csv")
        if scheme == "reference":
            _write_reference_csv(csv_path, final_value, final_ci)
        else:
            _write_merged_csv(csv_path, result.logs)
        if hasattr(result.policy, "theta") and result.logs:
            np.save(os.path.join(scheme_dir, "theta_trace.npy"), result.logs[-1].theta_trace)
            if len(result.logs) > 1:
                np.save(os.path.join(scheme_dir, "theta_trace_warmup.npy"),
                        result.logs[0].theta_trace)
            save_checkpoint(
                os.path.join(scheme_dir, "checkpoint_final.json"),
                result.policy, x.env, x.seed, train.episodes)
            if x.checkpoint_every > 0:
                _periodic_checkpoints(scheme_dir, result, x, features, train)
        summary = {
            "scheme": scheme,
            "final_value": final_value,
            "final_ci95": final_ci,
            "reference_value": references[FINAL_PHASE].value,
            "reference": references[FINAL_PHASE].description,
            "max_ln_kappa": _max_ln_kappa(result.logs),
        }
        with open(os.path.join(scheme_dir, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
    return SchemeOutput(scheme, result, final_value, final_ci, csv_path)


def _periodic_checkpoints(scheme_dir, result, x, features, train):
    trace = result.logs[-1].theta_trace
    for t in range(0, trace.shape[0], x.checkpoint_every):
        policy = LogLinearPolicy(features, trace[t])
        save_checkpoint(
            os.path.join(scheme_dir, f"checkpoint_{t:06d}.json"), policy, x.env, x.seed, t)


def _max_ln_kappa(logs: list[TrainLog]) -> float | None:
    best = None
    for log in logs:
        for row in log.rows:
            v = row.ln_kappa
            if v == v:  # not NaN
                best = v if best is None else max(best, v)
    return best


def _write_merged_csv(path, logs: list[TrainLog]) -> None:
    from .training import TRAINLOG_COLUMNS, TRAINLOG_SCHEMA_VERSION

    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"schema_version,{TRAINLOG_SCHEMA_VERSION}\n")
        fh.write(",".join(TRAINLOG_COLUMNS) + "\n")
        for log in logs:
            for row in log.rows:
                fh.write(",".join(row.csv_cells()) + "\n")


def _write_reference_csv(path, value: float, ci: float) -> None:
    from .training import TrainLogRow, TRAINLOG_COLUMNS, TRAINLOG_SCHEMA_VERSION

    row = TrainLogRow(0, 0, "reference", value, ci, math.nan, math.nan, 0.0, 0.0)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"schema_version,{TRAINLOG_SCHEMA_VERSION}\n")
        fh.write(",".join(TRAINLOG_COLUMNS) + "\n")
        fh.write(",".join(row.csv_cells()) + "\n")


def run_experiment(x: ExperimentConfig, out_dir: str, workers: int = 1) -> list[SchemeOutput]:
    """Run every scheme (each in its own subdirectory) and write a manifest.

    All schemes share the environment seed, so they see identical instance
    distributions; scheme-level parallelism cannot change any output because
    every random draw is derived from (seed, scheme, ...) labels.
    """
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "name": x.name,
        "master_seed": x.seed,
        "env": x.env,
        "schemes": list(x.schemes),
        "streams": _stream_manifest(x),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)

    outputs: list[SchemeOutput] = []
    failures: list[tuple[str, Exception]] = []
    if workers > 1 and len(x.schemes) > 1:
        import concurrent.futures as cf

        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            futs = {pool.submit(run_experiment_scheme, x, s, out_dir): s for s in x.schemes}
            by_scheme = {}
            for fut in cf.as_completed(futs):
                try:
                    out = fut.result()
                except Exception as exc:  # completed schemes' outputs stay on disk
                    failures.append((futs[fut], exc))
                    continue
                by_scheme[out.scheme] = out
        outputs = [by_scheme[s] for s in x.schemes if s in by_scheme]
    else:
        for scheme in x.schemes:
            try:
                outputs.append(run_experiment_scheme(x, scheme, out_dir))
            except Exception as exc:
                failures.append((scheme, exc))
    if failures:
        summary = "; ".join(f"{s}: {e}" for s, e in failures)
        raise ExperimentFailure(summary, outputs)
    return outputs


class ExperimentFailure(RuntimeError):
    """One or more schemes failed; completed schemes' outputs are preserved."""

    def __init__(self, message: str, outputs: list):
        super().__init__(message)
        self.outputs = outputs


def _stream_manifest(x: ExperimentConfig) -> list[dict]:
    """Labels of every top-level derived stream; per-trajectory streams extend
    the training label with (iteration, trajectory index)."""
    labels = [
        ("env", x.env.get("seed")),
        ("curriculum", (x.seed, "curriculum")),
        ("reference", (x.seed, "reference")),
    ]
    for scheme in x.schemes:
        labels.append(("train", (x.seed, "traj", "phase", "iteration", "trajectory")))
        labels.append(("eval", (x.seed, "eval", scheme)))
    return [{"purpose": p, "labels": repr(l), "key": list(stream_key(l))} for p, l in labels]
