"""Relative condition numbers: closed forms, the empirical sandwich, and the
failure mode.

With one-hot state features the condition number of a threshold sampler
against the optimal threshold policy has a closed form k with guarantee
k <= kappa <= 2k: at zero parameters kappa equals k exactly, and no parameter
choice can push it past 2k.  A coin-flip sampler pays an exponential price,
and a sampler that never reaches states the optimal policy needs has
kappa = infinity -- curricula can be arbitrarily bad.
"""

import math

import numpy as np

from lmdp_npg import (
    NaiveRandomPolicy,
    OneHotPolicy,
    SecretarySpec,
    SpConfig,
    ThresholdPolicy,
    kappa_closed_form_sp,
    kappa_empirical,
    sp_generate_distribution,
    sp_optimal_policy_dp,
)


def main():
    n = 10
    cfg = sp_generate_distribution(n, classical=True)
    spec = SecretarySpec(cfg)
    opt = sp_optimal_policy_dp(cfg)
    q = 0.2
    forms = kappa_closed_form_sp(cfg.p_series, opt.policy.threshold, q)
    print(f"classical n={n}, sampler threshold q={q}:")
    print(f"  closed form: k_curl = {forms.k_curl:.4f}   k_naive = {forms.k_naive:.4f}"
          f"  (gap factor {forms.k_naive / forms.k_curl:.0f})")

    policy0 = OneHotPolicy(spec.observations())
    k_curl0 = kappa_empirical(spec, opt.policy, policy0, sampler=ThresholdPolicy(q), ridge=0.0)
    k_naive0 = kappa_empirical(spec, opt.policy, policy0, sampler=NaiveRandomPolicy(), ridge=0.0)
    print(f"  empirical at zero parameters: {k_curl0:.4f} and {k_naive0:.4f} (equal to k)")

    rng = np.random.default_rng(1)
    worst_curl = max(
        kappa_empirical(spec, opt.policy,
                        OneHotPolicy(spec.observations(), rng.normal(size=2 * n) * 2),
                        sampler=ThresholdPolicy(q), ridge=0.0)
        for _ in range(30)
    )
    print(f"  worst over 30 random parameter draws: {worst_curl:.4f} <= 2k = {2 * forms.k_curl:.4f}")

    print("\nfailure mode: the best candidate always arrives last (all P_i = 1)")
    bad = SpConfig(8, (1.0,) * 8)
    bad_spec = SecretarySpec(bad)
    bad_opt = sp_optimal_policy_dp(bad)
    print(f"  optimal: accept only position {bad_opt.accept_from}, value {bad_opt.value}")
    pol = OneHotPolicy(bad_spec.observations())
    kap_thr = kappa_empirical(bad_spec, bad_opt.policy, pol, sampler=ThresholdPolicy(0.5), ridge=0.0)
    kap_nv = kappa_empirical(bad_spec, bad_opt.policy, pol, sampler=NaiveRandomPolicy(), ridge=0.0)
    print(f"  q=0.5 threshold sampler: kappa = {kap_thr} (never reaches the last state)")
    print(f"  coin-flip sampler:       kappa = {kap_nv:.1f} = 2^(n-1) -- finite beats a curriculum here")


if __name__ == "__main__":
    main()
