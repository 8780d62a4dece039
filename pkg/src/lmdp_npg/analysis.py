"""Theory-side diagnostics.

* Closed-form relative condition numbers for threshold-policy secretary
  instances (lower value k with the guarantee k <= kappa <= 2k).
* Empirical kappa for arbitrary policies: the largest generalized eigenvalue
  between the reference-policy Fisher form and the sampling-distribution
  Fisher form, with an exact rank test deciding the infinite case.
* The fitting error of an update weight under the reference visitation, and
  its geometrically decayed running average.
* The tail-sum characterisation of the optimal secretary threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import ACCEPT, REJECT, LatentMdpSpec, Policy, component_value_tables, \
    component_visitations, reachable_states, _reg_reward
from .policies import LogLinearPolicy
from .rng import stream
from .training import PolicyCache, sample_advantage


# ---------------------------------------------------------------------------
# closed forms for secretary threshold policies
# ---------------------------------------------------------------------------


@dataclass
class KappaClosedForm:
    k_curl: float
    k_naive: float


def kappa_closed_form_sp(p_series, p: float, q: float) -> KappaClosedForm:
    """Order-exact condition numbers for a p-threshold target and q-threshold
    or coin-flip sampler.

        k_curl  = prod_{j = floor(nq)+1}^{floor(np)} 1 / (1 - P_j)   (q <= p)
                = 1                                                  (q > p)
        k_naive = 2^floor(np) * max(1, max_{i >= floor(np)+2}
                       prod_{j = floor(np)+1}^{i-1} 2 (1 - P_j))

    Any P_j = 1 inside the curl product range makes k_curl infinite: the
    sampler never reaches the states the optimal policy lives on.
    """
    n = len(p_series)
    if not (0.0 < p < 1.0 and 0.0 < q < 1.0):
        raise ValueError("thresholds must lie in (0, 1)")
    np_, nq_ = math.floor(n * p), math.floor(n * q)
    if q > p:
        k_curl = 1.0
    else:
        k_curl = 1.0
        for j in range(nq_ + 1, np_ + 1):
            pj = p_series[j - 1]
            if pj >= 1.0:
                k_curl = math.inf
                break
            k_curl /= 1.0 - pj
    inner = 1.0
    prod = 1.0
    for i in range(np_ + 2, n + 1):
        prod *= 2.0 * (1.0 - p_series[i - 2])  # j = i - 1, 0-indexed
        inner = max(inner, prod)
    k_naive = (2.0 ** np_) * inner
    return KappaClosedForm(k_curl, k_naive)


# ---------------------------------------------------------------------------
# generic Fisher forms
# ---------------------------------------------------------------------------


def _score(policy_cache: PolicyCache, obs, action: int) -> np.ndarray:
    p = policy_cache.prob(obs)
    phi = policy_cache.state_features(obs)
    return (1.0 - p) * phi if action == ACCEPT else -p * phi


def generic_fisher_exact(
    spec: LatentMdpSpec,
    visit_policy: Policy,
    policy: LogLinearPolicy,
    uniform_actions: bool = False,
) -> np.ndarray:
    """Visitation-weighted sum over steps of score outer products.

    States come from ``visit_policy``; action weights come from the same
    policy, or are uniform when the grafted form is requested.  Scores are
    those of ``policy``.
    """
    cache = PolicyCache(policy)
    d = policy.dim
    sigma = np.zeros((d, d))
    for dist in spec.mixture_state_visitations(visit_policy):
        for obs, mass in dist.items():
            if mass == 0.0:
                continue
            if uniform_actions:
                w_acc = w_rej = 0.5
            else:
                w_acc = float(visit_policy.prob_accept(obs))
                w_rej = 1.0 - w_acc
            for action, w in ((REJECT, w_rej), (ACCEPT, w_acc)):
                if w == 0.0:
                    continue
                g = _score(cache, obs, action)
                sigma += (mass * w) * np.outer(g, g)
    return 0.5 * (sigma + sigma.T)


def generic_fisher_mc(
    spec: LatentMdpSpec,
    visit_policy: Policy,
    policy: LogLinearPolicy,
    uniform_actions: bool,
    episodes: int,
    seed,
) -> np.ndarray:
    """Monte Carlo estimate of the same form: mean over episodes of the
    trajectory's summed score outer products (terminal padding included)."""
    cache = PolicyCache(policy)
    visit_cache = PolicyCache(visit_policy)
    rng = stream(seed, "fisher-mc")
    d = policy.dim
    scores = np.empty((episodes * spec.horizon, d))
    k = 0
    for _ in range(episodes):
        comp = spec.sample_component(rng)
        state = comp.reset_state()
        for _ in range(spec.horizon):
            obs = comp.encode(state)
            p_visit = visit_cache.prob(obs)
            if uniform_actions:
                a_eval = int(rng.integers(2))
            else:
                a_eval = ACCEPT if rng.random() < p_visit else REJECT
            scores[k] = _score(cache, obs, a_eval)
            k += 1
            if comp.is_terminal(state):
                a_exec = REJECT
            elif uniform_actions:
                a_exec = ACCEPT if rng.random() < p_visit else REJECT
            else:
                a_exec = a_eval
            state, _ = comp.step(state, a_exec)
    sigma = scores.T @ scores / episodes
    return 0.5 * (sigma + sigma.T)


def kappa_from_sigmas(
    sigma_ref: np.ndarray,
    sigma_t: np.ndarray,
    ridge: float = 1e-10,
    rank_tol: float = 1e-9,
) -> float:
    """sup_x (x' sigma_ref x) / (x' sigma_t x), or +inf.

    An exact rank test decides the infinite verdict first: if sigma_ref has
    mass outside the column space of sigma_t (eigenvalues below rank_tol times
    its largest), the ratio is unbounded.  Otherwise the problem restricts to
    that column space, where ``ridge`` (relative to the largest eigenvalue of
    sigma_t, so the result is invariant to rescaling both forms) regularises
    the generalized eigensolve; ridge = 0 gives the exact ratio.
    """
    a = 0.5 * (sigma_ref + sigma_ref.T)
    b = 0.5 * (sigma_t + sigma_t.T)
    wb, vb = np.linalg.eigh(b)
    bmax = float(wb[-1])
    amax = float(np.linalg.eigvalsh(a)[-1])
    if amax <= 0.0:
        return 0.0
    if bmax <= 0.0:
        return math.inf
    keep = wb > rank_tol * bmax
    if not np.all(keep):
        null = vb[:, ~keep]
        outside = float(np.linalg.eigvalsh(null.T @ a @ null)[-1])
        if outside > rank_tol * amax:
            return math.inf
    basis = vb[:, keep]
    a_r = basis.T @ a @ basis
    b_r = np.diag(wb[keep]) + (ridge * bmax) * np.eye(int(keep.sum()))
    vals = scipy.linalg.eigh(a_r, b_r, eigvals_only=True)
    return max(float(vals[-1]), 0.0)


def kappa_empirical(
    spec: LatentMdpSpec,
    reference_policy: Policy,
    policy: LogLinearPolicy,
    sampler: Policy | None = None,
    ridge: float = 1e-10,
    rank_tol: float = 1e-9,
    mc_episodes: int | None = None,
    seed=0,
) -> float:
    """Relative condition number at the given policy parameters.

    ``sampler=None`` compares against the policy's own on-policy Fisher form;
    otherwise against the grafted form of the fixed sampler (its states,
    uniform actions).  Exact visitations are used when the spec supports them,
    else ``mc_episodes`` trajectories estimate both forms.
    """
    if mc_episodes is None:
        sigma_ref = generic_fisher_exact(spec, reference_policy, policy, uniform_actions=False)
        if sampler is None:
            sigma_t = generic_fisher_exact(spec, policy, policy, uniform_actions=False)
        else:
            sigma_t = generic_fisher_exact(spec, sampler, policy, uniform_actions=True)
    else:
        if mc_episodes < 10 * policy.dim ** 2 / spec.horizon:
            raise ValueError("mc sample count too small for a d x d Fisher estimate")
        sigma_ref = generic_fisher_mc(
            spec, reference_policy, policy, False, mc_episodes, (seed, "ref"))
        if sampler is None:
            sigma_t = generic_fisher_mc(spec, policy, policy, False, mc_episodes, (seed, "t"))
        else:
            sigma_t = generic_fisher_mc(spec, sampler, policy, True, mc_episodes, (seed, "t"))
    return kappa_from_sigmas(sigma_ref, sigma_t, ridge, rank_tol)


# ---------------------------------------------------------------------------
# fitting error
# ---------------------------------------------------------------------------


def fitting_error(
    spec: LatentMdpSpec,
    reference_policy: Policy,
    policy: LogLinearPolicy,
    g: np.ndarray,
    lam: float = 0.0,
    mc_episodes: int | None = None,
    seed=0,
    clip_u: float = math.inf,
) -> float:
    """Mean residual of the advantage fit under the reference visitation:

        sum over steps of E_{(s,a) ~ reference} [ A(s, a) - g . score(s, a) ]

    Exact when the spec supports aggregate tables or enumeration; otherwise
    estimated by rolling the reference policy and reusing the +-2 advantage
    estimator (clipped consistently with training when lam > 0).
    """
    g = np.asarray(g, dtype=float)
    if mc_episodes is not None:
        return _fitting_error_mc(spec, reference_policy, policy, g, lam, mc_episodes, seed, clip_u)
    cache = PolicyCache(policy)
    H = spec.horizon
    if hasattr(spec, "aggregate_value_tables"):
        V, Q = spec.aggregate_value_tables(policy, lam)
        total = 0.0
        for t, dist in enumerate(spec.mixture_state_visitations(reference_policy)):
            rem = H - t
            for obs, mass in dist.items():
                if mass == 0.0:
                    continue
                w_acc = float(reference_policy.prob_accept(obs))
                for action, w in ((REJECT, 1.0 - w_acc), (ACCEPT, w_acc)):
                    if w == 0.0:
                        continue
                    adv = Q[rem][(obs, action)] - V[rem][obs]
                    total += mass * w * (adv - float(g @ _score(cache, obs, action)))
        return total
    total = 0.0
    for weight, comp in spec.enumerate_components():
        states = reachable_states(comp)
        vtab = component_value_tables(comp, policy, lam, H, states)
        dtab = component_visitations(comp, reference_policy, H)
        for t in range(H):
            rem = H - t
            for s, ps in dtab[t].items():
                if ps == 0.0:
                    continue
                obs = comp.encode(s)
                w_acc = float(reference_policy.prob_accept(obs))
                p_cur = cache.prob(obs)
                for action, w in ((REJECT, 1.0 - w_acc), (ACCEPT, w_acc)):
                    if w == 0.0:
                        continue
                    s2, r = comp.step(s, action)
                    p_a = p_cur if action == ACCEPT else 1.0 - p_cur
                    adv = _reg_reward(r, p_a, lam) + vtab[rem - 1][s2] - vtab[rem][s]
                    total += weight * ps * w * (adv - float(g @ _score(cache, obs, action)))
    return total


def _fitting_error_mc(spec, reference_policy, policy, g, lam, episodes, seed, clip_u):
    rng = stream(seed, "err-mc")
    ref_cache = PolicyCache(reference_policy)
    cur_cache = PolicyCache(policy)
    H = spec.horizon
    total = 0.0
    for k in range(episodes):
        h = k % H
        comp = spec.sample_component(rng)
        s = sample_advantage(comp, ref_cache, False, cur_cache, h, lam, clip_u, rng, H)
        total += s.a_hat - float(g @ _score(cur_cache, s.obs, s.action))
    return H * total / episodes


def decayed_average(err_values, eta: float, lam: float) -> np.ndarray:
    """Running weighted average with weights (1 - eta lam)^(t - i), O(1) per step."""
    if eta * lam >= 1.0 or eta * lam < 0.0:
        raise ValueError("eta * lam must lie in [0, 1)")
    decay = 1.0 - eta * lam
    out = np.empty(len(err_values))
    num = 0.0
    den = 0.0
    for t, e in enumerate(err_values):
        num = decay * num + e
        den = decay * den + 1.0
        out[t] = num / den
    return out


# ---------------------------------------------------------------------------
# optimal secretary threshold characterisation
# ---------------------------------------------------------------------------


@dataclass
class ThresholdCharacterisation:
    accept_from: int
    p: float


def optimal_threshold_from_series(p_series) -> ThresholdCharacterisation:
    """Smallest position t with sum_{i > t} P_i / (1 - P_i) <= 1.

    Valid when P_i < 1 for i >= 2 (the tail sums are finite); callers fall
    back to dynamic programming otherwise.  The returned p places the
    threshold strictly between positions: floor(n p) = accept_from - 1.
    """
    n = len(p_series)
    if any(x >= 1.0 for x in p_series[1:]):
        raise ValueError("tail-sum characterisation requires P_i < 1 for i >= 2")
    tail = 0.0
    tails = [0.0] * (n + 2)  # tails[i] = sum_{k >= i} P_k / (1 - P_k)
    for i in range(n, 1, -1):
        pi = p_series[i - 1]
        tail += pi / (1.0 - pi)
        tails[i] = tail
    tails[1] = math.inf  # P_1 = 1
    accept_from = next(i for i in range(1, n + 1) if tails[i + 1] <= 1.0)
    return ThresholdCharacterisation(accept_from, (accept_from - 0.5) / n)


@dataclass
class KappaReport:
    kappa_lower: float | None  # closed-form k (when applicable)
    kappa_upper: float | None  # 2k
    kappa_empirical: float | None
    at_theta: list | None

    def to_json_dict(self) -> dict:
        def enc(x):
            if x is None:
                return None
            return "inf" if math.isinf(x) else x

        return {
            "kappa_lower": enc(self.kappa_lower),
            "kappa_upper": enc(self.kappa_upper),
            "kappa_empirical": enc(self.kappa_empirical),
            "at_theta": self.at_theta,
        }
