"""Secretary problem as a latent MDP.

An instance is the vector of best-so-far indicators (x_1, ..., x_n): x_i = 1
when the i-th candidate outranks all predecessors.  Indicators are independent
with P(x_i = 1) = P_i (P_1 = 1 by definition; the classical uniform-permutation
problem has P_i = 1/i).  The global best candidate is the *last* index with
x_i = 1, so accepting a best-so-far candidate at position i wins exactly when
no later best-so-far appears, which has probability prod_{j>i} (1 - P_j).

States are encoded scale-invariantly as (i/n, x_i) with the absorbing state
(0, 0), so one parameter vector transfers between instance sizes.

Because the indicators are independent, the pair (position, flag) is Markov in
the mixture: forward and backward recursions on this aggregate chain give
exact visitations, values and advantages for any n without enumerating the
2^(n-1) instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..core import ACCEPT, REJECT, InstanceTooLargeError, LatentMdpSpec, Policy
from ..rng import stream

TERMINAL = (0, 0)
TERMINAL_OBS = (0.0, 0.0)


@dataclass(frozen=True)
class SpConfig:
    n: int
    p_series: tuple[float, ...]
    seed: int | None = None
    classical: bool = False

    def __post_init__(self):
        if self.n < 1 or len(self.p_series) != self.n:
            raise ValueError("p_series must have length n >= 1")
        if self.p_series[0] != 1.0:
            raise ValueError("P_1 must equal 1")
        for p in self.p_series[1:]:
            if not 0.0 < p <= 1.0:
                raise ValueError("P_i must lie in (0, 1] for i >= 2")


def sp_generate_distribution(n: int, seed: int | None = None, classical: bool = False) -> SpConfig:
    """Instance distribution over indicator series.

    Classical mode fixes P_i = 1/i.  Otherwise each exponent e_i = 2 u_i + 0.25
    with u_i uniform on [0, 1] gives P_i = i^(-e_i), reproducibly from the seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if classical:
        series = tuple(1.0 / i for i in range(1, n + 1))
        return SpConfig(n, series, seed, classical=True)
    if seed is None:
        raise ValueError("seeded mode requires a seed")
    rng = stream(seed, "sp-distribution")
    u = rng.random(n)
    series = [1.0] + [float(i ** -(2.0 * u[i - 1] + 0.25)) for i in range(2, n + 1)]
    return SpConfig(n, tuple(series), seed, classical=False)


class SecretaryInstance:
    """One sampled indicator vector, played as a deterministic MDP."""

    __slots__ = ("n", "xs", "best")

    def __init__(self, xs: tuple[int, ...], best: int | None = None):
        self.n = len(xs)
        self.xs = xs
        if best is None:
            best = max(i + 1 for i, x in enumerate(xs) if x)
        self.best = best

    def reset_state(self):
        return (1, self.xs[0])

    def step(self, state, action: int):
        i, x = state
        if i == 0:
            return TERMINAL, 0.0
        if action == ACCEPT:
            return TERMINAL, 1.0 if (x == 1 and i == self.best) else 0.0
        if i == self.n:
            return TERMINAL, 0.0
        return (i + 1, self.xs[i]), 0.0

    def encode(self, state) -> tuple:
        i, x = state
        return (i / self.n, float(x))

    def is_terminal(self, state) -> bool:
        return state[0] == 0


class SecretarySpec(LatentMdpSpec):
    def __init__(self, config: SpConfig):
        self.config = config
        self.horizon = config.n
        self.p = np.asarray(config.p_series)
        self._p_list = list(config.p_series)

    @property
    def n(self) -> int:
        return self.config.n

    def sample_component(self, rng) -> SecretaryInstance:
        draw = rng.random
        best = 0
        xs = []
        for i, p in enumerate(self._p_list):
            if draw() < p:
                xs.append(1)
                best = i + 1
            else:
                xs.append(0)
        return SecretaryInstance(tuple(xs), best)

    def enumeration_cost(self) -> float:
        cost = 1.0
        for p in self.config.p_series[1:]:
            if p < 1.0:
                cost *= 2.0
        return cost

    def enumerate_components(self) -> list[tuple[float, SecretaryInstance]]:
        options = [[(1, 1.0)]]
        for p in self.config.p_series[1:]:
            options.append([(1, p)] if p == 1.0 else [(1, p), (0, 1.0 - p)])
        out = []
        for combo in itertools.product(*options):
            xs = tuple(x for x, _ in combo)
            weight = math.prod(w for _, w in combo)
            out.append((weight, SecretaryInstance(xs)))
        return out

    def observations(self) -> list[tuple]:
        """All non-terminal encoded states, position-major."""
        return [(i / self.n, float(x)) for i in range(1, self.n + 1) for x in (0.0, 1.0)]

    # -- aggregate-chain recursions (exact for any n) -----------------------

    def mixture_state_visitations(self, policy: Policy) -> list[dict[tuple, float]]:
        n = self.n
        p = self.config.p_series
        dist = {(1, 1): 1.0}
        out = []
        for _ in range(n):
            out.append({self._obs(s): q for s, q in dist.items()})
            nxt: dict = {}
            for (i, x), q in dist.items():
                if i == 0:
                    nxt[TERMINAL] = nxt.get(TERMINAL, 0.0) + q
                    continue
                pa = float(policy.prob_accept((i / n, float(x))))
                stop = q * pa
                go = q * (1.0 - pa)
                if i == n:
                    stop += go
                    go = 0.0
                if stop > 0.0:
                    nxt[TERMINAL] = nxt.get(TERMINAL, 0.0) + stop
                if go > 0.0:
                    nxt[(i + 1, 1)] = nxt.get((i + 1, 1), 0.0) + go * p[i]
                    if p[i] < 1.0:
                        nxt[(i + 1, 0)] = nxt.get((i + 1, 0), 0.0) + go * (1.0 - p[i])
            dist = nxt
        return out

    def _obs(self, state) -> tuple:
        i, x = state
        return (i / self.n, float(x)) if i else TERMINAL_OBS

    def win_probabilities(self) -> np.ndarray:
        """win[i] = P(accepting a best-so-far at position i wins), 1-indexed."""
        n = self.n
        win = np.ones(n + 1)
        for i in range(n - 1, 0, -1):
            win[i] = win[i + 1] * (1.0 - self.config.p_series[i])
        return win

    def aggregate_value_tables(self, policy: Policy, lam: float = 0.0):
        """(V, Q) on the aggregate chain, indexed by steps remaining.

        ``V[h][obs]`` / ``Q[h][(obs, a)]`` are posterior means over the hidden
        instance given the visited state; by independence of the indicators
        they do not depend on how the state was reached.
        """
        n = self.n
        p = self.config.p_series
        win = self.win_probabilities()
        states = [(i, x) for i in range(1, n + 1) for x in (0, 1)] + [TERMINAL]
        probs = {s: float(policy.prob_accept(self._obs(s))) for s in states}
        V: list[dict] = [{self._obs(s): 0.0 for s in states}]
        Q: list[dict] = [dict()]
        for h in range(1, n + 1):
            prev = V[h - 1]
            vrow: dict = {}
            qrow: dict = {}
            for s in states:
                i, x = s
                pa = probs[s]
                obs = self._obs(s)
                if i == 0:
                    q_acc = _reg(0.0, pa, lam) + prev[TERMINAL_OBS]
                    q_rej = _reg(0.0, 1.0 - pa, lam) + prev[TERMINAL_OBS]
                else:
                    r_acc = win[i] if x == 1 else 0.0
                    q_acc = _reg(r_acc, pa, lam) + prev[TERMINAL_OBS]
                    if i == n:
                        cont = prev[TERMINAL_OBS]
                    else:
                        cont = p[i] * prev[((i + 1) / n, 1.0)] + (1.0 - p[i]) * prev[((i + 1) / n, 0.0)]
                    q_rej = _reg(0.0, 1.0 - pa, lam) + cont
                qrow[(obs, ACCEPT)] = q_acc
                qrow[(obs, REJECT)] = q_rej
                v = 0.0
                if pa > 0.0:
                    v += pa * q_acc
                if pa < 1.0:
                    v += (1.0 - pa) * q_rej
                vrow[obs] = v
            V.append(vrow)
            Q.append(qrow)
        return V, Q

    def policy_value(self, policy: Policy, lam: float = 0.0) -> float:
        """Exact mixture value of any history-independent policy, O(n^2)."""
        V, _ = self.aggregate_value_tables(policy, lam)
        return V[self.n][(1 / self.n, 1.0)]


def _reg(r: float, p: float, lam: float) -> float:
    if lam == 0.0:
        return r
    if p <= 0.0:
        return math.inf
    return r + lam * math.log(1.0 / p)


class ThresholdPolicy:
    """Accept candidate i iff i/n > p and the candidate is best so far."""

    def __init__(self, threshold: float):
        if not 0.0 < threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")
        self.threshold = float(threshold)

    def prob_accept(self, obs: tuple) -> float:
        f, x = obs
        return 1.0 if (f > self.threshold and x == 1.0) else 0.0

    def action_probs(self, obs: tuple) -> np.ndarray:
        p = self.prob_accept(obs)
        return np.array([1.0 - p, p])


@dataclass
class SpOptimalResult:
    policy: ThresholdPolicy
    value: float
    accept_from: int  # smallest position whose best-so-far candidates are accepted
    accept_values: np.ndarray = field(repr=False)
    continue_values: np.ndarray = field(repr=False)


def sp_optimal_policy_dp(config: SpConfig) -> SpOptimalResult:
    """Optimal policy by backward induction over (position, flag).

    accept value  A(i) = prod_{j>i} (1 - P_j)
    continue value U(i) = P_{i+1} max(A(i+1), U(i+1)) + (1 - P_{i+1}) U(i+1)

    A is nondecreasing and U nonincreasing in i, so the optimal policy is a
    threshold rule; when all P_i < 1 for i >= 2 the threshold index is
    cross-checked against the tail-sum characterisation
    sum_{i > t} P_i / (1 - P_i) <= 1 < sum_{i >= t} P_i / (1 - P_i).
    """
    n = config.n
    p = config.p_series
    A = np.ones(n + 2)
    for i in range(n - 1, 0, -1):
        A[i] = A[i + 1] * (1.0 - p[i])
    U = np.zeros(n + 2)
    for i in range(n - 1, -1, -1):
        # p[i] is P_{i+1}: p_series is 0-indexed
        U[i] = p[i] * max(A[i + 1], U[i + 1]) + (1.0 - p[i]) * U[i + 1]
    accept_from = next(i for i in range(1, n + 1) if A[i] >= U[i])
    value = float(U[0])
    if all(q < 1.0 for q in p[1:]):
        from ..analysis import optimal_threshold_from_series

        characterised = optimal_threshold_from_series(p)
        if characterised.accept_from != accept_from:
            raise AssertionError(
                f"DP threshold {accept_from} disagrees with tail-sum characterisation "
                f"{characterised.accept_from}"
            )
    policy = ThresholdPolicy((accept_from - 0.5) / n)
    return SpOptimalResult(policy, value, accept_from, A[1 : n + 1], U[: n + 1])


def sp_threshold_visitation(p_series, threshold: float, i: int) -> float:
    """P(reaching position i) under a threshold policy: closed form."""
    n = len(p_series)
    start = math.floor(n * threshold) + 1
    out = 1.0
    for j in range(start, i):
        out *= 1.0 - p_series[j - 1]
    return out


def naive_visitation(i: int) -> float:
    """P(reaching position i) under coin-flip play: 2^(1-i)."""
    return 0.5 ** (i - 1)
