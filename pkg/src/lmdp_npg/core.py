"""Latent-MDP abstraction and exact / Monte Carlo evaluation.

A latent MDP is a mixture of MDP components sharing the state encoding, the
two-action space (reject = 0, accept = 1) and the horizon H.  One component is
drawn per episode with its mixing weight; its identity is hidden from the
policy.  For the online selection problems in this package every component is
deterministic once the instance is drawn, so exact evaluation enumerates the
component's reachable state graph and runs backward/forward recursions over
it.  The instance draw itself plays the role of the initial-state
distribution: each component exposes a single deterministic start state.

Conventions used throughout:

* ``h`` in value tables counts *steps remaining*, so ``V[h][s]`` is the
  expected sum of the next ``h`` regularized rewards from ``s``.
* ``t`` in visitation tables counts *steps taken*, so ``d[t][s]`` is the
  probability of standing in ``s`` after ``t`` steps.  The two meet through
  ``t = H - h``.
* With regularization coefficient ``lam`` the per-step reward is
  ``r(s, a) + lam * ln(1 / pi(a | s))``; equivalently each step adds
  ``lam`` times the policy entropy at the visited state in expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

from .rng import stream

REJECT = 0
ACCEPT = 1
ACTIONS = (REJECT, ACCEPT)

#: Default ceiling on (reachable states) x horizon summed over components.
DEFAULT_ENUMERATION_CAP = 1_000_000


class InstanceTooLargeError(ValueError):
    """Raised when exact evaluation would exceed the enumeration cap."""

    def __init__(self, detail: str = ""):
        msg = "instance too large for exact evaluation"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class Policy(Protocol):
    """Anything mapping an encoded observation to accept/reject probabilities."""

    def prob_accept(self, obs: tuple) -> float: ...

    def action_probs(self, obs: tuple) -> np.ndarray: ...


class MdpComponent(Protocol):
    """One member MDP of the mixture; deterministic given the instance."""

    def reset_state(self): ...

    def step(self, state, action: int) -> tuple[object, float]: ...

    def encode(self, state) -> tuple: ...

    def is_terminal(self, state) -> bool: ...


@dataclass
class Trajectory:
    """A rolled-out episode: (state, action, reward) triples, at most H of them."""

    steps: list[tuple[object, int, float]]
    component_index: int | None = None


class LatentMdpSpec:
    """Base class for latent-MDP instances.

    Subclasses provide episode sampling and, when the mixture is small enough,
    exact enumeration of ``(weight, component)`` pairs.
    """

    horizon: int
    action_count: int = 2

    def sample_component(self, rng) -> MdpComponent:
        raise NotImplementedError

    def enumerate_components(self) -> list[tuple[float, MdpComponent]]:
        raise InstanceTooLargeError("mixture cannot be enumerated")

    def enumeration_cost(self) -> float:
        """Upper bound on components x states x 1 used against the cap."""
        return math.inf

    def mixture_state_visitations(self, policy: Policy) -> list[dict[tuple, float]]:
        """Mixture-marginal visitation of encoded observations per step taken.

        ``out[t][obs] = sum_m w_m * d_{m,t}(s)`` merged over components by
        observation; exact, via component enumeration.  Environment-specific
        subclasses override this with cheaper recursions when available.
        """
        out: list[dict[tuple, float]] = [dict() for _ in range(self.horizon)]
        for weight, comp in self.enumerate_components():
            tables = component_visitations(comp, policy, self.horizon)
            for t in range(self.horizon):
                for s, p in tables[t].items():
                    key = comp.encode(s)
                    out[t][key] = out[t].get(key, 0.0) + weight * p
        return out


class ExplicitLatentMdp(LatentMdpSpec):
    """A mixture given by an explicit component list with mixing weights."""

    def __init__(self, components: Sequence[MdpComponent], weights: Sequence[float], horizon: int):
        weights = [float(w) for w in weights]
        if len(weights) != len(components):
            raise ValueError("one weight per component required")
        if any(w <= 0.0 for w in weights):
            raise ValueError("mixing weights must be positive")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise ValueError("mixing weights must sum to 1 within 1e-12")
        self.components = list(components)
        self.weights = weights
        self.horizon = int(horizon)
        self._cum = np.cumsum(weights)

    def sample_component(self, rng) -> MdpComponent:
        u = rng.random()
        idx = int(np.searchsorted(self._cum, u, side="right"))
        return self.components[min(idx, len(self.components) - 1)]

    def enumerate_components(self) -> list[tuple[float, MdpComponent]]:
        return list(zip(self.weights, self.components))

    def enumeration_cost(self) -> float:
        return float(len(self.components))


# ---------------------------------------------------------------------------
# per-component recursions
# ---------------------------------------------------------------------------


def reachable_states(comp: MdpComponent, cap: float = math.inf) -> list:
    """Closure of states reachable from the start state under both actions."""
    start = comp.reset_state()
    seen = {start}
    order = [start]
    frontier = [start]
    while frontier:
        nxt = []
        for s in frontier:
            for a in ACTIONS:
                s2, _ = comp.step(s, a)
                if s2 not in seen:
                    seen.add(s2)
                    order.append(s2)
                    nxt.append(s2)
                    if len(seen) > cap:
                        raise InstanceTooLargeError(f"more than {cap:g} states")
        frontier = nxt
    return order


def _entropy_from_p(p: float) -> float:
    q = 1.0 - p
    out = 0.0
    if p > 0.0:
        out -= p * math.log(p)
    if q > 0.0:
        out -= q * math.log(q)
    return out


def _reg_reward(r: float, p: float, lam: float) -> float:
    if lam == 0.0:
        return r
    if p <= 0.0:
        return math.inf
    return r + lam * math.log(1.0 / p)


def component_value_tables(
    comp: MdpComponent, policy: Policy, lam: float, horizon: int, states: list | None = None
) -> list[dict]:
    """``V[h][s]``: exact regularized value with ``h`` steps remaining."""
    if states is None:
        states = reachable_states(comp)
    trans = {}
    probs = {}
    for s in states:
        obs = comp.encode(s)
        pa = float(policy.prob_accept(obs))
        probs[s] = (1.0 - pa, pa)
        trans[s] = tuple(comp.step(s, a) for a in ACTIONS)
    tables: list[dict] = [{s: 0.0 for s in states}]
    for _ in range(horizon):
        prev = tables[-1]
        cur = {}
        for s in states:
            v = 0.0
            for a in ACTIONS:
                p = probs[s][a]
                if p == 0.0:
                    continue
                s2, r = trans[s][a]
                v += p * (_reg_reward(r, p, lam) + prev[s2])
            cur[s] = v
        tables.append(cur)
    return tables


def component_entropy_tables(
    comp: MdpComponent, policy: Policy, horizon: int, states: list | None = None
) -> list[dict]:
    """``E[h][s]``: expected sum of policy entropies over the next ``h`` steps."""
    if states is None:
        states = reachable_states(comp)
    tables: list[dict] = [{s: 0.0 for s in states}]
    for _ in range(horizon):
        prev = tables[-1]
        cur = {}
        for s in states:
            pa = float(policy.prob_accept(comp.encode(s)))
            v = _entropy_from_p(pa)
            for a, p in ((REJECT, 1.0 - pa), (ACCEPT, pa)):
                if p == 0.0:
                    continue
                s2, _ = comp.step(s, a)
                v += p * prev[s2]
            cur[s] = v
        tables.append(cur)
    return tables


def component_q_value(
    comp: MdpComponent, policy: Policy, lam: float, h: int, state, action: int,
    value_tables: list[dict] | None = None,
) -> float:
    """Exact regularized Q with ``h`` steps remaining, first action given."""
    if h <= 0:
        return 0.0
    if value_tables is None:
        value_tables = component_value_tables(comp, policy, lam, h)
    p = float(policy.action_probs(comp.encode(state))[action])
    s2, r = comp.step(state, action)
    return _reg_reward(r, p, lam) + value_tables[h - 1][s2]


def component_visitations(comp: MdpComponent, policy: Policy, horizon: int) -> list[dict]:
    """``d[t][s]``: probability of being in ``s`` after ``t`` steps (t < H)."""
    dist = {comp.reset_state(): 1.0}
    out = [dist]
    for _ in range(horizon - 1):
        nxt: dict = {}
        for s, p in dist.items():
            pa = float(policy.prob_accept(comp.encode(s)))
            for a, pr in ((REJECT, 1.0 - pa), (ACCEPT, pa)):
                if pr == 0.0:
                    continue
                s2, _ = comp.step(s, a)
                nxt[s2] = nxt.get(s2, 0.0) + p * pr
        dist = nxt
        out.append(dist)
    return out


# ---------------------------------------------------------------------------
# spec-level exact operations
# ---------------------------------------------------------------------------


def _check_cap(spec: LatentMdpSpec, cap: float) -> list[tuple[float, MdpComponent]]:
    if spec.enumeration_cost() * spec.horizon > cap:
        raise InstanceTooLargeError(
            f"enumeration cost {spec.enumeration_cost():g} x horizon {spec.horizon} exceeds cap {cap:g}"
        )
    return spec.enumerate_components()


def evaluate_value_exact(
    spec: LatentMdpSpec, policy: Policy, lam: float = 0.0, cap: float = DEFAULT_ENUMERATION_CAP
) -> float:
    """Exact mixture value: weighted start-state value over all components."""
    total = 0.0
    work = 0
    for weight, comp in _check_cap(spec, cap):
        states = reachable_states(comp, cap)
        work += len(states) * spec.horizon
        if work > cap:
            raise InstanceTooLargeError(f"states x horizon exceeds cap {cap:g}")
        tables = component_value_tables(comp, policy, lam, spec.horizon, states)
        total += weight * tables[spec.horizon][comp.reset_state()]
    return total


def advantage_exact(
    spec: LatentMdpSpec, policy: Policy, lam: float, m: int, h: int, state, action: int,
    cap: float = DEFAULT_ENUMERATION_CAP,
) -> float:
    """Exact regularized advantage in component ``m`` with ``h`` steps remaining."""
    comps = _check_cap(spec, cap)
    _, comp = comps[m]
    if h <= 0:
        return 0.0
    tables = component_value_tables(comp, policy, lam, h)
    q = component_q_value(comp, policy, lam, h, state, action, tables)
    return q - tables[h][state]


@dataclass
class VisitationTable:
    """Per-component visitation at one step, with derived state-action forms."""

    component_index: int
    weight: float
    state: dict
    encode: object = field(repr=False)
    prob_accept: object = field(repr=False)

    def state_action(self) -> dict:
        out = {}
        for s, p in self.state.items():
            pa = float(self.prob_accept(self.encode(s)))
            out[(s, REJECT)] = p * (1.0 - pa)
            out[(s, ACCEPT)] = p * pa
        return out

    def grafted(self) -> dict:
        """States from the policy, actions uniform: d(s) * 1/|A| per action."""
        out = {}
        for s, p in self.state.items():
            out[(s, REJECT)] = 0.5 * p
            out[(s, ACCEPT)] = 0.5 * p
        return out


def visitation_distribution(
    spec: LatentMdpSpec, policy: Policy, h: int, cap: float = DEFAULT_ENUMERATION_CAP
) -> list[VisitationTable]:
    """Exact state visitation after ``h`` steps, one table per component."""
    if not 0 <= h < spec.horizon:
        raise ValueError(f"step index {h} outside horizon {spec.horizon}")
    out = []
    for m, (weight, comp) in enumerate(_check_cap(spec, cap)):
        tables = component_visitations(comp, policy, h + 1)
        out.append(
            VisitationTable(m, weight, tables[h], comp.encode, policy.prob_accept)
        )
    return out


def policy_gradient_exact(
    spec: LatentMdpSpec, policy, lam: float = 0.0, cap: float = DEFAULT_ENUMERATION_CAP
) -> np.ndarray:
    """Exact gradient of the regularized mixture value for a log-linear policy.

    Accumulates, over components and steps, the visitation-weighted product of
    the Q-value and the score vector of the taken action.
    """
    H = spec.horizon
    grad = np.zeros(policy.dim)
    for weight, comp in _check_cap(spec, cap):
        states = reachable_states(comp, cap)
        vtab = component_value_tables(comp, policy, lam, H, states)
        dtab = component_visitations(comp, policy, H)
        for t in range(H):  # step t has H - t steps remaining
            rem = H - t
            for s, ps in dtab[t].items():
                if ps == 0.0:
                    continue
                obs = comp.encode(s)
                probs = policy.action_probs(obs)
                for a in ACTIONS:
                    pa = float(probs[a])
                    if pa == 0.0:
                        continue
                    s2, r = comp.step(s, a)
                    q = _reg_reward(r, pa, lam) + vtab[rem - 1][s2]
                    grad += weight * ps * pa * q * policy.grad_log_prob(obs, a)
    return grad


def conditional_advantage_tables(
    spec: LatentMdpSpec, visit_policy: Policy, policy: Policy, lam: float = 0.0,
    cap: float = DEFAULT_ENUMERATION_CAP,
) -> list[dict]:
    """Component-averaged advantages conditioned on the visited observation.

    ``out[t][(obs, a)]`` is the posterior-weighted advantage
    ``E[A_{m, H-t}(s, a) | s visited at step t under visit_policy]`` -- the
    quantity a single-trajectory advantage estimator targets when the
    component identity is hidden.
    """
    H = spec.horizon
    num: list[dict] = [dict() for _ in range(H)]
    den: list[dict] = [dict() for _ in range(H)]
    for weight, comp in _check_cap(spec, cap):
        states = reachable_states(comp, cap)
        vtab = component_value_tables(comp, policy, lam, H, states)
        dtab = component_visitations(comp, visit_policy, H)
        for t in range(H):
            rem = H - t
            for s, ps in dtab[t].items():
                if ps == 0.0:
                    continue
                obs = comp.encode(s)
                probs = policy.action_probs(obs)
                for a in ACTIONS:
                    pa = float(probs[a])
                    s2, r = comp.step(s, a)
                    adv = _reg_reward(r, pa, lam) + vtab[rem - 1][s2] - vtab[rem][s]
                    key = (obs, a)
                    num[t][key] = num[t].get(key, 0.0) + weight * ps * adv
                    den[t][key] = den[t].get(key, 0.0) + weight * ps
    out: list[dict] = []
    for t in range(H):
        out.append({k: num[t][k] / den[t][k] for k in num[t]})
    return out


# ---------------------------------------------------------------------------
# Monte Carlo evaluation
# ---------------------------------------------------------------------------


def rollout_return(comp: MdpComponent, policy: Policy, lam: float, horizon: int, rng) -> float:
    """One episode's regularized return; entropy bonus taken in expectation."""
    state = comp.reset_state()
    total = 0.0
    for t in range(horizon):
        if comp.is_terminal(state):
            if lam > 0.0:
                total += (horizon - t) * lam * _entropy_from_p(
                    float(policy.prob_accept(comp.encode(state)))
                )
            break
        pa = float(policy.prob_accept(comp.encode(state)))
        if lam > 0.0:
            total += lam * _entropy_from_p(pa)
        action = ACCEPT if rng.random() < pa else REJECT
        state, r = comp.step(state, action)
        total += r
    return total


def rollout_trajectory(comp: MdpComponent, policy: Policy, rng, horizon: int,
                       component_index: int | None = None) -> Trajectory:
    state = comp.reset_state()
    steps = []
    for _ in range(horizon):
        if comp.is_terminal(state):
            break
        pa = float(policy.prob_accept(comp.encode(state)))
        action = ACCEPT if rng.random() < pa else REJECT
        nxt, r = comp.step(state, action)
        steps.append((state, action, r))
        state = nxt
    return Trajectory(steps, component_index)


def evaluate_value_mc(
    spec: LatentMdpSpec, policy: Policy, lam: float, episodes: int, seed
) -> tuple[float, float]:
    """Unbiased Monte Carlo estimate of the mixture value with a 95% CI halfwidth."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    rng = stream(seed, "value-mc")
    returns = np.empty(episodes)
    for k in range(episodes):
        comp = spec.sample_component(rng)
        returns[k] = rollout_return(comp, policy, lam, spec.horizon, rng)
    mean = float(returns.mean())
    if episodes > 1:
        ci = float(1.96 * returns.std(ddof=1) / math.sqrt(episodes))
    else:
        ci = math.inf
    return mean, ci
