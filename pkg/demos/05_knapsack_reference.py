"""Online knapsack (decision version): the bang-per-buck reference and a
short curriculum training run.

The reference policy thresholds the value/size ratio; its threshold is tuned
by ternary search on the plain sum-of-values objective, which is unimodal in
the threshold, unlike the decision objective's plateaus.  All policies are
compared on common random numbers.
"""

import time

from lmdp_npg import (
    CurriculumConfig,
    OkdConfig,
    OkdPolyFeatures,
    TrainConfig,
    evaluate_value_mc,
    generate_curriculum,
    okd_bang_per_buck_reference,
    okd_policy_value_mc,
    run_scheme,
)
from lmdp_npg.envs.knapsack import OkdSpec


class AcceptAll:
    def prob_accept(self, obs):
        return 0.0 if obs[0] == 0.0 else 1.0


class RejectAll:
    def prob_accept(self, obs):
        return 0.0


def main():
    final = OkdConfig(10, budget=2.0, target=1.8)
    print(f"n={final.n} items ~ Unif[0,1]^2, budget {final.budget}, value target {final.target}")

    search = okd_bang_per_buck_reference(final, 20_000, seed=5)
    print(f"ternary search on [0, {search.interval[1]:.1f}] "
          f"-> ratio threshold r = {search.policy.ratio_threshold:.3f}")

    episodes = 100_000
    for name, policy in (("bang-per-buck", search.policy),
                         ("accept everything", AcceptAll()),
                         ("reject everything", RejectAll())):
        value, ci = okd_policy_value_mc(final, policy, episodes, seed=77)
        print(f"  {name:18s}: success probability {value:.4f} +- {ci:.4f}")

    print("\nshort curriculum run (warm-up n=5 with lighter target)")
    warm = generate_curriculum(final, 5, seed=9)
    print(f"  warm-up: budget {warm.budget:.2f}, target {warm.target:.2f}")
    cfg = CurriculumConfig(
        final_spec=OkdSpec(final),
        features=OkdPolyFeatures(3),
        train=TrainConfig(eta=0.1, episodes=120, batch=50, seed=1, log_every=40),
        warmup_spec=OkdSpec(warm),
        warmup_episodes=80,
        reference_policy=search.policy,
    )
    tic = time.time()
    result = run_scheme("curl", cfg)
    value, ci = evaluate_value_mc(OkdSpec(final), result.policy, 0.0, 20_000, seed=123)
    print(f"  trained policy value {value:.4f} +- {ci:.4f} after {time.time() - tic:.0f}s "
          f"(reference {okd_policy_value_mc(final, search.policy, 20_000, seed=123)[0]:.4f}; "
          "longer runs close the gap)")


if __name__ == "__main__":
    main()
