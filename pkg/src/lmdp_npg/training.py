"""Sample-based natural policy gradient with a pluggable sampling policy.

Each iteration collects one trajectory per (batch index, start step) pair.  A
trajectory rolls the sampling policy to the start step, records the state and
an action (uniform when a fixed sampler is used, the sampler's own action
otherwise), then estimates the current policy's regularized advantage at that
pair with a +-2 importance weight: with probability 1/2 the recorded action is
replaced by a fresh draw from the current policy and the return is weighted by
-2 (a value estimate), otherwise the recorded action is kept and the return is
weighted by +2 (a Q estimate).  The difference is exactly unbiased for the
advantage when lam = 0; with regularization the recorded action's entropy
bonus is clipped at U, which biases each estimate by at most
lam * |A| / e^(U + 1).

The iteration then sums score outer products and advantage-weighted scores
over all trajectories (unnormalized: the common factor drops out of the
quadratic argmin), solves the ball-constrained quadratic for the update
weight, and steps the parameters.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .core import ACCEPT, REJECT, LatentMdpSpec
from .policies import LogLinearPolicy, NaiveRandomPolicy
from .rng import stream, traj_stream
from .solver import solve_constrained_quadratic

LOG2 = math.log(2.0)

TRAINLOG_SCHEMA_VERSION = 1
TRAINLOG_COLUMNS = (
    "iteration",
    "samples_cumulative",
    "mode",
    "reward_mean",
    "reward_ci95",
    "ln_kappa",
    "avg_err",
    "lambda",
    "wall_ms",
)


class TrainingDivergedError(RuntimeError):
    pass


class PolicyCache:
    """Memoises accept probabilities and feature vectors per observation.

    Worth it because the secretary chain revisits a handful of states millions
    of times; knapsack states rarely repeat but the lookup cost is negligible
    next to the feature computation it would trigger.
    """

    __slots__ = ("policy", "probs", "feats", "cap")

    def __init__(self, policy, cap: int = 200_000):
        self.policy = policy
        self.probs: dict = {}
        self.feats: dict = {}
        self.cap = cap

    def prob(self, obs) -> float:
        p = self.probs.get(obs)
        if p is None:
            p = float(self.policy.prob_accept(obs))
            if len(self.probs) < self.cap:
                self.probs[obs] = p
        return p

    def state_features(self, obs) -> np.ndarray:
        phi = self.feats.get(obs)
        if phi is None:
            phi = self.policy.features.state_features(obs)
            if len(self.feats) < self.cap:
                self.feats[obs] = phi
        return phi


def _entropy(p: float) -> float:
    out = 0.0
    if p > 0.0:
        out -= p * math.log(p)
    if 1.0 - p > 0.0:
        out -= (1.0 - p) * math.log(1.0 - p)
    return out


def _clipped_surprise(p: float, clip_u: float) -> float:
    if p <= 0.0:
        return clip_u
    return min(math.log(1.0 / p), clip_u)


@dataclass
class AdvantageSample:
    obs: tuple
    action: int
    a_hat: float
    h: int


def advantage_bound(lam: float, clip_u: float, horizon: int) -> float:
    """Worst-case magnitude of a single estimate: 2[1 + lam U + H (1 + lam ln|A|)]."""
    clip_term = lam * clip_u if lam > 0.0 else 0.0
    return 2.0 * (1.0 + clip_term + horizon * (1.0 + lam * LOG2))


def sample_advantage(
    component,
    sampler: PolicyCache,
    unif: bool,
    current: PolicyCache,
    h: int,
    lam: float,
    clip_u: float,
    rng,
    horizon: int,
) -> AdvantageSample:
    """One trajectory's (state, action, advantage estimate) at start step h."""
    state = component.reset_state()
    for _ in range(h):
        if component.is_terminal(state):
            break
        pa = sampler.prob(component.encode(state))
        action = ACCEPT if rng.random() < pa else REJECT
        state, _ = component.step(state, action)

    obs = component.encode(state)
    if unif:
        a_rec = int(rng.integers(2))
    else:
        a_rec = ACCEPT if rng.random() < sampler.prob(obs) else REJECT

    p_cur = current.prob(obs)
    if rng.random() < 0.5:
        coeff = -2.0
        a_exec = ACCEPT if rng.random() < p_cur else REJECT
        state, r = component.step(state, a_exec)
        total = r + lam * _entropy(p_cur)
    else:
        coeff = 2.0
        state, r = component.step(state, a_rec)
        total = r
        if lam:
            p_rec = p_cur if a_rec == ACCEPT else 1.0 - p_cur
            total += lam * _clipped_surprise(p_rec, clip_u)

    for i in range(h + 1, horizon):
        if component.is_terminal(state):
            if lam:
                total += (horizon - i) * lam * _entropy(current.prob(component.encode(state)))
            break
        p = current.prob(component.encode(state))
        if lam:
            total += lam * _entropy(p)
        action = ACCEPT if rng.random() < p else REJECT
        state, r = component.step(state, action)
        total += r

    a_hat = coeff * total
    assert abs(a_hat) <= advantage_bound(lam, clip_u, horizon) + 1e-9, "advantage estimate out of range"
    return AdvantageSample(obs, a_rec, a_hat, h)


@dataclass
class FisherAndGradientEstimate:
    f_hat: np.ndarray
    nabla_hat: np.ndarray

    def __post_init__(self):
        asym = float(np.max(np.abs(self.f_hat - self.f_hat.T), initial=0.0))
        if asym > 1e-12:
            raise ValueError(f"Fisher estimate asymmetric by {asym:g}")


def estimate_fisher_and_gradient(
    samples: list[AdvantageSample],
    policy: LogLinearPolicy,
    weights: np.ndarray | None = None,
) -> FisherAndGradientEstimate:
    """Unnormalized sums of score outer products and weighted scores.

    ``weights`` replaces per-sample counts when the caller enumerates
    (state, action) pairs exhaustively instead of sampling them.
    """
    if not samples:
        raise ValueError("need at least one sample")
    cache = PolicyCache(policy)
    d = policy.dim
    scores = np.empty((len(samples), d))
    advs = np.empty(len(samples))
    for k, s in enumerate(samples):
        p = cache.prob(s.obs)
        phi = cache.state_features(s.obs)
        scores[k] = (1.0 - p) * phi if s.action == ACCEPT else -p * phi
        advs[k] = s.a_hat
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        scaled = scores * w[:, None]
        f_hat = scaled.T @ scores
        nabla = scaled.T @ advs
    else:
        f_hat = scores.T @ scores
        nabla = scores.T @ advs
    f_hat = 0.5 * (f_hat + f_hat.T)
    return FisherAndGradientEstimate(f_hat, nabla)


@dataclass
class TrainConfig:
    eta: float = 0.2
    episodes: int = 100          # iterations of the outer loop
    batch: int = 100             # trajectories per start step per iteration
    lam: float = 0.0
    clip: float = LOG2 + 5.0
    ball_radius: float = 50.0
    sampler: object = None       # None (on-policy) | "naive" | policy object
    init_theta: np.ndarray | None = None
    seed: int = 0
    solver_tol: float = 1e-10
    # fewer PGD iterations than the solver's own default: beyond ~1e3 the
    # solve only sharpens noise-dominated low-curvature directions
    solver_max_iters: int = 1500
    log_every: int = 1

    def __post_init__(self):
        if self.eta < 0.0:
            raise ValueError("eta must be >= 0")
        if self.lam < 0.0:
            raise ValueError("lam must be >= 0")
        if self.lam > 0.0 and self.clip < LOG2 - 1.0:
            raise ValueError("clip bound must be >= ln|A| - 1 when lam > 0")
        if self.ball_radius <= 0.0:
            raise ValueError("ball_radius must be positive")
        if self.batch < 1 or self.episodes < 0:
            raise ValueError("batch must be >= 1 and episodes >= 0")


@dataclass
class TrainLogRow:
    iteration: int
    samples_cumulative: int
    mode: str
    reward_mean: float
    reward_ci95: float
    ln_kappa: float
    avg_err: float
    lam: float
    wall_ms: float

    def csv_cells(self) -> list[str]:
        return [
            str(self.iteration),
            str(self.samples_cumulative),
            self.mode,
            _fmt(self.reward_mean),
            _fmt(self.reward_ci95),
            _fmt(self.ln_kappa),
            _fmt(self.avg_err),
            _fmt(self.lam),
            _fmt(self.wall_ms),
        ]


def _fmt(x: float) -> str:
    if x != x:
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


@dataclass
class TrainLog:
    mode: str
    rows: list[TrainLogRow] = field(default_factory=list)
    theta_trace: np.ndarray | None = None

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"schema_version,{TRAINLOG_SCHEMA_VERSION}\n")
            fh.write(",".join(TRAINLOG_COLUMNS) + "\n")
            for row in self.rows:
                fh.write(",".join(row.csv_cells()) + "\n")


@dataclass
class TrainResult:
    policy: LogLinearPolicy
    log: TrainLog


class DecayedErrAverage:
    """Running weighted average with geometric decay (1 - eta lam) per iteration."""

    def __init__(self, eta: float, lam: float):
        if eta * lam >= 1.0:
            raise ValueError("eta * lam must be < 1")
        self.decay = 1.0 - eta * lam
        self.num = 0.0
        self.den = 0.0
        self.last_iteration: int | None = None

    def update(self, iteration: int, err: float) -> float:
        gap = 1 if self.last_iteration is None else iteration - self.last_iteration
        w = self.decay ** gap
        self.num = w * self.num + err
        self.den = w * self.den + 1.0
        self.last_iteration = iteration
        return self.num / self.den

    @property
    def value(self) -> float:
        return self.num / self.den if self.den > 0.0 else math.nan


def npg_train(
    spec: LatentMdpSpec,
    policy0: LogLinearPolicy,
    config: TrainConfig,
    metrics_fn=None,
    phase: int = 0,
    mode: str = "train",
    sample_offset: int = 0,
) -> TrainResult:
    """Run the batched natural-gradient loop and return the final policy.

    ``metrics_fn(iteration, policy, g)`` may return a dict with any of
    ``reward_mean``, ``reward_ci95``, ``ln_kappa`` and ``err``; it is invoked
    at the logging cadence with the *post-update* policy.  All randomness is
    drawn from streams derived from (config.seed, phase, iteration,
    trajectory index), so reruns and worker splits are bit-identical.
    """
    H = spec.horizon
    theta = np.array(policy0.theta, dtype=float) if config.init_theta is None \
        else np.asarray(config.init_theta, dtype=float)
    policy = policy0.with_theta(theta)

    if config.sampler is None:
        fixed_sampler = None
    elif config.sampler == "naive":
        fixed_sampler = NaiveRandomPolicy()
    else:
        fixed_sampler = config.sampler
    sampler_cache = PolicyCache(fixed_sampler) if fixed_sampler is not None else None

    trace = np.empty((config.episodes + 1, policy.dim))
    trace[0] = policy.theta
    log = TrainLog(mode=mode)
    err_avg = DecayedErrAverage(config.eta, config.lam)
    samples_per_iter = config.batch * H

    for t in range(config.episodes):
        tic = time.perf_counter()
        current_cache = PolicyCache(policy)
        unif = fixed_sampler is not None
        roll_cache = sampler_cache if unif else current_cache

        samples = []
        for n in range(config.batch):
            for h in range(H):
                rng = traj_stream(config.seed, "traj", phase, t, n * H + h)
                comp = spec.sample_component(rng)
                samples.append(
                    sample_advantage(
                        comp, roll_cache, unif, current_cache, h,
                        config.lam, config.clip, rng, H,
                    )
                )

        est = estimate_fisher_and_gradient(samples, policy)
        g = solve_constrained_quadratic(
            est.f_hat, est.nabla_hat, config.ball_radius,
            config.solver_tol, config.solver_max_iters,
        )
        gnorm = float(np.linalg.norm(g))
        assert gnorm <= config.ball_radius + 1e-9, "update weight escaped the ball"

        theta = theta + config.eta * g
        if not np.all(np.isfinite(theta)):
            raise TrainingDivergedError(f"non-finite parameters at iteration {t}")
        policy = policy.with_theta(theta)
        trace[t + 1] = theta

        if (t + 1) % config.log_every == 0 or t == config.episodes - 1:
            metrics = metrics_fn(t, policy, g) if metrics_fn is not None else {}
            err = metrics.get("err")
            avg_err = err_avg.update(t, err) if err is not None else err_avg.value
            log.rows.append(
                TrainLogRow(
                    iteration=t,
                    samples_cumulative=sample_offset + (t + 1) * samples_per_iter,
                    mode=mode,
                    reward_mean=metrics.get("reward_mean", math.nan),
                    reward_ci95=metrics.get("reward_ci95", math.nan),
                    ln_kappa=metrics.get("ln_kappa", math.nan),
                    avg_err=avg_err if avg_err is not None else math.nan,
                    lam=config.lam,
                    wall_ms=(time.perf_counter() - tic) * 1e3,
                )
            )

    log.theta_trace = trace
    return TrainResult(policy, log)
