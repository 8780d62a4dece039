"""Online knapsack, decision version, as a latent MDP.

An instance is a sequence of n items with values and sizes drawn i.i.d. from
two fixed distributions.  The agent sees items one at a time and must accept
or reject irrevocably; an accept only succeeds when the remaining budget
covers the item's size (otherwise it is a no-op and the episode continues).
The single unit of reward arrives the first time the accepted values reach
the target, after which the state is absorbing.

States are encoded as (i/n, size_i, value_i, used budget fraction, achieved
value fraction) with the all-zero absorbing state, again scale-invariant in n.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..core import ACCEPT, InstanceTooLargeError, LatentMdpSpec
from ..rng import stream

TERMINAL = None  # knapsack states are tuples; None marks the absorbing state
TERMINAL_OBS = (0.0, 0.0, 0.0, 0.0, 0.0)


class GranularDistribution:
    """Piecewise-uniform distribution on [0, 1] with weighted bins.

    Sampling picks bin i with probability proportional to its weight, then
    returns (i - 1 + u) / gran with u uniform.  gran = 1 is exactly Unif[0, 1].
    """

    def __init__(self, bin_weights):
        w = np.asarray(bin_weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("need a 1-d, non-empty weight vector")
        if np.any(w <= 0.0):
            raise ValueError("bin weights must be positive")
        self.bin_weights = w
        self.gran = w.size
        self._cum = np.cumsum(w / w.sum())

    def sample(self, rng, size: int) -> np.ndarray:
        bins = np.searchsorted(self._cum, rng.random(size), side="right")
        bins = np.minimum(bins, self.gran - 1)
        return (bins + rng.random(size)) / self.gran

    def cdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        probs = self.bin_weights / self.bin_weights.sum()
        edges = np.arange(self.gran + 1) / self.gran
        below = np.concatenate([[0.0], np.cumsum(probs)])
        idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, self.gran - 1)
        frac = np.clip((x - edges[idx]) * self.gran, 0.0, 1.0)
        out = below[idx] + probs[idx] * frac
        return np.where(x <= 0.0, 0.0, np.where(x >= 1.0, 1.0, out))

    def support(self):
        return None  # continuous


class PointMassDistribution:
    """Finite-support distribution; enables exact enumeration in tests."""

    def __init__(self, atoms, probs=None):
        self.atoms = [float(a) for a in atoms]
        if probs is None:
            probs = [1.0 / len(self.atoms)] * len(self.atoms)
        self.probs = [float(p) for p in probs]
        if len(self.probs) != len(self.atoms) or abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError("probabilities must match atoms and sum to 1")
        self._cum = np.cumsum(self.probs)

    def sample(self, rng, size: int) -> np.ndarray:
        idx = np.searchsorted(self._cum, rng.random(size), side="right")
        return np.asarray(self.atoms)[np.minimum(idx, len(self.atoms) - 1)]

    def support(self):
        return list(zip(self.atoms, self.probs))


def okd_sample_distribution(gran: int, seed) -> GranularDistribution:
    """Seeded bin weights, uniform on [0, 1] per bin."""
    if gran < 1:
        raise ValueError("gran must be >= 1")
    rng = stream(seed, "okd-distribution")
    w = rng.random(gran)
    while np.any(w <= 0.0):  # measure-zero, but keep the invariant exact
        w = rng.random(gran)
    return GranularDistribution(w)


@dataclass
class OkdConfig:
    n: int
    budget: float
    target: float
    value_dist: object = None  # defaults to Unif[0, 1]
    size_dist: object = None
    seed: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.budget <= 0.0 or self.target <= 0.0:
            raise ValueError("budget and target must be positive")
        if self.value_dist is None:
            self.value_dist = GranularDistribution([1.0])
        if self.size_dist is None:
            self.size_dist = GranularDistribution([1.0])


class KnapsackInstance:
    """One sampled item sequence, played as a deterministic MDP."""

    __slots__ = ("values", "sizes", "budget", "target", "n")

    def __init__(self, values, sizes, budget: float, target: float):
        self.values = tuple(float(v) for v in values)
        self.sizes = tuple(float(s) for s in sizes)
        self.budget = float(budget)
        self.target = float(target)
        self.n = len(self.values)

    def reset_state(self):
        return (1, 0.0, 0.0)  # (position, used size, achieved value)

    def step(self, state, action: int):
        if state is TERMINAL:
            return TERMINAL, 0.0
        i, used, got = state
        if action == ACCEPT and used + self.sizes[i - 1] <= self.budget:
            used = used + self.sizes[i - 1]
            got = got + self.values[i - 1]
            if got >= self.target:
                return TERMINAL, 1.0
        if i == self.n:
            return TERMINAL, 0.0
        return (i + 1, used, got), 0.0

    def encode(self, state) -> tuple:
        if state is TERMINAL:
            return TERMINAL_OBS
        i, used, got = state
        return (
            i / self.n,
            self.sizes[i - 1],
            self.values[i - 1],
            used / self.budget,
            got / self.target,
        )

    def is_terminal(self, state) -> bool:
        return state is TERMINAL


class OkdSpec(LatentMdpSpec):
    def __init__(self, config: OkdConfig):
        self.config = config
        self.horizon = config.n

    @property
    def n(self) -> int:
        return self.config.n

    def sample_component(self, rng) -> KnapsackInstance:
        c = self.config
        values = c.value_dist.sample(rng, c.n)
        sizes = c.size_dist.sample(rng, c.n)
        return KnapsackInstance(values, sizes, c.budget, c.target)

    def enumeration_cost(self) -> float:
        sv = self.config.value_dist.support()
        ss = self.config.size_dist.support()
        if sv is None or ss is None:
            return math.inf
        return float((len(sv) * len(ss)) ** self.config.n)

    def enumerate_components(self) -> list[tuple[float, KnapsackInstance]]:
        sv = self.config.value_dist.support()
        ss = self.config.size_dist.support()
        if sv is None or ss is None:
            raise InstanceTooLargeError("item distributions are continuous")
        import itertools

        c = self.config
        out = []
        per_item = [(v, pv, s, ps) for (v, pv) in sv for (s, ps) in ss]
        for combo in itertools.product(per_item, repeat=c.n):
            weight = math.prod(pv * ps for _, pv, _, ps in combo)
            values = [v for v, _, _, _ in combo]
            sizes = [s for _, _, s, _ in combo]
            out.append((weight, KnapsackInstance(values, sizes, c.budget, c.target)))
        return out


class BangPerBuckPolicy:
    """Accept an item iff its value/size ratio meets the threshold.

    The environment turns accepts that exceed the remaining budget into
    no-ops, so the policy itself never inspects the budget.
    """

    def __init__(self, ratio_threshold: float):
        self.ratio_threshold = float(ratio_threshold)

    def prob_accept(self, obs: tuple) -> float:
        f, size, value = obs[0], obs[1], obs[2]
        if f == 0.0:
            return 0.0  # absorbing state
        ratio = value / size if size > 0.0 else math.inf
        return 1.0 if ratio >= self.ratio_threshold else 0.0

    def action_probs(self, obs: tuple) -> np.ndarray:
        p = self.prob_accept(obs)
        return np.array([1.0 - p, p])


def _simulate_ratio_policy(values, sizes, budget: float, r: float):
    """Vectorised greedy play of a ratio threshold over pre-drawn episodes.

    Returns (sum of accepted values, achieved-target masks are left to the
    caller).  values/sizes have shape (episodes, n).
    """
    eps, n = values.shape
    used = np.zeros(eps)
    got = np.zeros(eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(sizes > 0.0, values / np.maximum(sizes, 1e-300), np.inf)
    for i in range(n):
        take = (ratios[:, i] >= r) & (used + sizes[:, i] <= budget)
        used = used + np.where(take, sizes[:, i], 0.0)
        got = got + np.where(take, values[:, i], 0.0)
    return got


@dataclass
class BangPerBuckSearchResult:
    policy: BangPerBuckPolicy
    objective: float  # mean sum-of-values under the tuned threshold
    interval: tuple[float, float]
    iterations: int


def okd_bang_per_buck_reference(
    config: OkdConfig, mc_episodes: int, seed, iterations: int = 64
) -> BangPerBuckSearchResult:
    """Reference policy: ternary search on the ratio threshold.

    The search objective is the *sum-of-values* knapsack reward (not the
    decision-version success probability, whose response to r has flat
    regions), estimated on a common set of pre-drawn episodes so that all
    candidate thresholds see identical randomness.  The searched interval is
    [0, max sampled value/size ratio].  The result is a reference, not an
    optimal policy for the decision problem.
    """
    if mc_episodes < 1:
        raise ValueError("mc_episodes must be >= 1")
    rng = stream(seed, "bang-per-buck")
    values = config.value_dist.sample(rng, mc_episodes * config.n).reshape(mc_episodes, config.n)
    sizes = config.size_dist.sample(rng, mc_episodes * config.n).reshape(mc_episodes, config.n)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(sizes > 0.0, values / np.maximum(sizes, 1e-300), np.inf)
    hi = float(np.max(ratios[np.isfinite(ratios)], initial=0.0))
    if not math.isfinite(hi) or hi <= 0.0:
        warnings.warn("degenerate ratio search interval; returning midpoint")
        return BangPerBuckSearchResult(BangPerBuckPolicy(0.5), 0.0, (0.0, 1.0), 0)

    def objective(r: float) -> float:
        return float(_simulate_ratio_policy(values, sizes, config.budget, r).mean())

    lo_r, hi_r = 0.0, hi
    for _ in range(iterations):
        m1 = lo_r + (hi_r - lo_r) / 3.0
        m2 = hi_r - (hi_r - lo_r) / 3.0
        if objective(m1) < objective(m2):
            lo_r = m1
        else:
            hi_r = m2
    best = 0.5 * (lo_r + hi_r)
    return BangPerBuckSearchResult(BangPerBuckPolicy(best), objective(best), (0.0, hi), iterations)


def okd_policy_value_mc(config: OkdConfig, policy, episodes: int, seed) -> tuple[float, float]:
    """Decision-version success probability of a deterministic ratio/constant policy.

    Vectorised over pre-drawn episodes with a shared stream, so different
    policies evaluated with the same seed see common random numbers.
    """
    rng = stream(seed, "okd-value")
    n = config.n
    values = config.value_dist.sample(rng, episodes * n).reshape(episodes, n)
    sizes = config.size_dist.sample(rng, episodes * n).reshape(episodes, n)
    used = np.zeros(episodes)
    got = np.zeros(episodes)
    done = np.zeros(episodes, dtype=bool)
    for i in range(n):
        obs_accepts = np.empty(episodes, dtype=bool)
        # deterministic policies only: probe per-episode acceptances
        f = (i + 1) / n
        for k in range(episodes):
            if done[k]:
                obs_accepts[k] = False
                continue
            obs = (f, sizes[k, i], values[k, i], used[k] / config.budget, got[k] / config.target)
            obs_accepts[k] = policy.prob_accept(obs) >= 0.5
        take = obs_accepts & ~done & (used + sizes[:, i] <= config.budget)
        used = used + np.where(take, sizes[:, i], 0.0)
        got = got + np.where(take, values[:, i], 0.0)
        done = done | (got >= config.target)
    mean = float(done.mean())
    ci = float(1.96 * math.sqrt(max(mean * (1.0 - mean), 0.0) / episodes))
    return mean, ci
