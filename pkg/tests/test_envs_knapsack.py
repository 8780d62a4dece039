import math

import numpy as np
import pytest

from lmdp_npg import (
    BangPerBuckPolicy,
    GranularDistribution,
    NaiveRandomPolicy,
    OkdConfig,
    OkdSpec,
    PointMassDistribution,
    evaluate_value_exact,
    evaluate_value_mc,
    okd_bang_per_buck_reference,
    okd_policy_value_mc,
    okd_sample_distribution,
)
from lmdp_npg.rng import stream


class AcceptAll:
    def prob_accept(self, obs):
        return 0.0 if obs[0] == 0.0 else 1.0

    def action_probs(self, obs):
        p = self.prob_accept(obs)
        return np.array([1 - p, p])


class RejectAll:
    def prob_accept(self, obs):
        return 0.0

    def action_probs(self, obs):
        return np.array([1.0, 0.0])


def point(v):
    return PointMassDistribution([v])


def test_trivial_single_acceptance_reaches_target():
    # every item has value 0.6 >= target and size 0.5 <= budget
    cfg = OkdConfig(3, budget=2.0, target=0.5, value_dist=point(0.6), size_dist=point(0.5))
    spec = OkdSpec(cfg)
    assert evaluate_value_exact(spec, AcceptAll()) == pytest.approx(1.0)


def test_always_reject_scores_zero():
    cfg = OkdConfig(4, budget=1.0, target=0.5)
    spec = OkdSpec(cfg)
    mean, ci = evaluate_value_mc(spec, RejectAll(), 0.0, 1000, seed=0)
    assert (mean, ci) == (0.0, 0.0)


def test_two_item_enumeration_oracle():
    # values in {0.3, 0.9}, sizes fixed 0.5; budget fits both items;
    # target 1.0 is reached iff at least one 0.9 appears (cases: 0.3+0.9,
    # 0.9+0.3, 0.9+0.9 -> prob 3/4) when accepting everything
    values = PointMassDistribution([0.3, 0.9], [0.5, 0.5])
    cfg = OkdConfig(2, budget=1.0, target=1.0, value_dist=values, size_dist=point(0.5))
    spec = OkdSpec(cfg)
    assert evaluate_value_exact(spec, AcceptAll()) == pytest.approx(0.75, abs=1e-12)
    mc, ci = evaluate_value_mc(spec, AcceptAll(), 0.0, 50_000, seed=1)
    assert abs(mc - 0.75) <= 3 * ci


def test_budget_insufficient_accept_is_noop():
    # second item never fits after the first is taken
    cfg = OkdConfig(2, budget=0.6, target=2.0, value_dist=point(1.0), size_dist=point(0.5))
    spec = OkdSpec(cfg)
    _, comp = spec.enumerate_components()[0]
    state = comp.reset_state()
    state, r = comp.step(state, 1)
    assert r == 0.0 and state == (2, 0.5, 1.0)
    state2, r2 = comp.step(state, 1)  # does not fit: no-op, episode ends (i = n)
    assert r2 == 0.0 and comp.is_terminal(state2)


def test_reward_emitted_once_then_absorbing():
    cfg = OkdConfig(3, budget=3.0, target=0.9, value_dist=point(1.0), size_dist=point(0.5))
    spec = OkdSpec(cfg)
    _, comp = spec.enumerate_components()[0]
    state = comp.reset_state()
    state, r = comp.step(state, 1)
    assert r == 1.0 and comp.is_terminal(state)
    state, r = comp.step(state, 1)
    assert r == 0.0 and comp.is_terminal(state)


def test_used_budget_never_exceeds_budget():
    cfg = OkdConfig(12, budget=1.5, target=50.0)  # unreachable target: no absorb
    spec = OkdSpec(cfg)
    rng = stream(3)
    for _ in range(300):
        comp = spec.sample_component(rng)
        state = comp.reset_state()
        for _ in range(12):
            if comp.is_terminal(state):
                break
            state, _ = comp.step(state, 1)
            if not comp.is_terminal(state):
                assert state[1] <= 1.5 + 1e-12
                assert state[2] < 50.0


def test_encoding_fractions():
    cfg = OkdConfig(4, budget=2.0, target=1.6, value_dist=point(0.4), size_dist=point(0.5))
    spec = OkdSpec(cfg)
    _, comp = spec.enumerate_components()[0]
    state = comp.reset_state()
    state, _ = comp.step(state, 1)
    obs = comp.encode(state)
    assert obs == pytest.approx((2 / 4, 0.5, 0.4, 0.5 / 2.0, 0.4 / 1.6))


def test_granular_gran1_is_uniform():
    dist = okd_sample_distribution(1, seed=0)
    assert dist.gran == 1
    draws = dist.sample(stream(1), 200_000)
    assert draws.min() >= 0.0 and draws.max() <= 1.0
    # Kolmogorov-Smirnov style check against the identity CDF
    xs = np.sort(draws)
    ecdf = np.arange(1, xs.size + 1) / xs.size
    assert np.max(np.abs(ecdf - xs)) < 0.005


def test_granular_cdf_dkw_band():
    dist = okd_sample_distribution(7, seed=5)
    n = 1_000_000
    draws = dist.sample(stream(2), n)
    grid = np.linspace(0.0, 1.0, 201)
    analytic = dist.cdf(grid)
    empirical = np.searchsorted(np.sort(draws), grid, side="right") / n
    # DKW: P(sup |F_n - F| > eps) <= 2 exp(-2 n eps^2); eps for 1e-6 level
    eps = math.sqrt(math.log(2 / 1e-6) / (2 * n))
    assert np.max(np.abs(empirical - analytic)) <= eps


def test_granular_sampling_deterministic():
    dist = okd_sample_distribution(5, seed=9)
    a = dist.sample(stream(4), 1000)
    b = dist.sample(stream(4), 1000)
    assert np.array_equal(a, b)


def test_granular_weights_positive_required():
    with pytest.raises(ValueError):
        GranularDistribution([0.5, 0.0])


def test_bang_per_buck_tie_case():
    # all ratios equal: any threshold below the common ratio accepts everything
    cfg = OkdConfig(5, budget=10.0, target=1.9,
                    value_dist=point(0.8), size_dist=point(0.4))
    search = okd_bang_per_buck_reference(cfg, 2000, seed=0)
    spec = OkdSpec(cfg)
    v_ref = evaluate_value_exact(spec, search.policy)
    v_all = evaluate_value_exact(spec, AcceptAll())
    assert v_ref == pytest.approx(v_all, abs=1e-12)


def test_bang_per_buck_beats_grid_on_knapsack_objective():
    from lmdp_npg.envs.knapsack import _simulate_ratio_policy

    cfg = OkdConfig(10, budget=2.0, target=1.5)
    search = okd_bang_per_buck_reference(cfg, 4000, seed=7)
    # common-random-number comparison on an independent evaluation draw
    rng = stream(99)
    values = cfg.value_dist.sample(rng, 4000 * 10).reshape(4000, 10)
    sizes = cfg.size_dist.sample(rng, 4000 * 10).reshape(4000, 10)
    best = _simulate_ratio_policy(values, sizes, cfg.budget, search.policy.ratio_threshold).mean()
    for r in (0.5, 1.0, 2.0):
        grid = _simulate_ratio_policy(values, sizes, cfg.budget, r).mean()
        assert best >= grid - 0.02  # small slack: tuned on a different draw


def test_bang_per_buck_deterministic():
    cfg = OkdConfig(8, budget=1.5, target=1.2)
    a = okd_bang_per_buck_reference(cfg, 3000, seed=3)
    b = okd_bang_per_buck_reference(cfg, 3000, seed=3)
    assert a.policy.ratio_threshold == b.policy.ratio_threshold


def test_policy_value_mc_common_random_numbers():
    cfg = OkdConfig(10, budget=2.0, target=1.5)
    v_ref, _ = okd_policy_value_mc(cfg, BangPerBuckPolicy(1.0), 20_000, seed=12)
    v_all, _ = okd_policy_value_mc(cfg, AcceptAll(), 20_000, seed=12)
    v_rej, _ = okd_policy_value_mc(cfg, RejectAll(), 20_000, seed=12)
    assert v_rej == 0.0
    assert 0.0 < v_all < 1.0
    # the mc helper agrees with the generic episode evaluator
    spec = OkdSpec(cfg)
    v_all_generic, ci = evaluate_value_mc(spec, AcceptAll(), 0.0, 20_000, seed=500)
    assert abs(v_all - v_all_generic) <= 4 * ci + 0.01
