"""Curriculum against the coin-flip sampler on a seeded secretary instance.

Runs three schemes at a shared trajectory budget -- fixed-sampler curriculum,
warm-start curriculum, and the coin-flip fixed sampler -- on an n=40 instance
with an n=10 warm-up.  At this size the coin-flip sampler's condition number
is astronomically large (its visitation decays like 2^-i, the optimal
policy's does not) and it learns essentially nothing, while both curriculum
schemes approach the optimum.  Takes a few minutes; the full experiment
matrix lives behind the CLI (`lmdp-npg run`).
"""

import math
import os
import time

from lmdp_npg import (
    CurriculumConfig,
    SecretarySpec,
    SpPolyFeatures,
    TrainConfig,
    generate_curriculum,
    kappa_empirical,
    run_scheme,
    sp_generate_distribution,
    sp_optimal_policy_dp,
)
from lmdp_npg.experiment import _write_merged_csv
from lmdp_npg.plotting import write_combined_svg

OUT = os.path.join(os.path.dirname(__file__), "out_curriculum")


def main():
    final = sp_generate_distribution(40, seed=2024)
    final_spec = SecretarySpec(final)
    opt = sp_optimal_policy_dp(final)
    warm = generate_curriculum(final, 10, seed=(2024, "curriculum"))
    warm_spec = SecretarySpec(warm)
    print(f"final n=40 optimal {opt.value:.4f}; warm-up n=10 optimal "
          f"{sp_optimal_policy_dp(warm).value:.4f}")

    features = SpPolyFeatures(4)

    def metrics_factory(phase, spec, sampler, lam):
        if phase == 0:
            return None

        def metrics(t, policy, g):
            kappa = kappa_empirical(spec, opt.policy, policy, sampler=sampler)
            return {
                "reward_mean": spec.policy_value(policy),
                "reward_ci95": 0.0,
                "ln_kappa": math.log(kappa) if kappa > 0 else -math.inf,
            }

        return metrics

    # equal trajectory budgets: a warm-up iteration costs horizon 10 per batch
    # row instead of 40, so 300 warm-up iterations trade for 75 final ones
    warm_iters, naive_iters = 300, 600
    curriculum_iters = naive_iters - (warm_iters * warm.n) // final.n
    os.makedirs(OUT, exist_ok=True)
    csvs = []
    for scheme in ("fix_samp_curl", "curl", "naive_samp"):
        tic = time.time()
        final_iters = naive_iters if scheme == "naive_samp" else curriculum_iters
        cfg = CurriculumConfig(
            final_spec=final_spec,
            features=features,
            train=TrainConfig(eta=0.2, episodes=final_iters, batch=50, seed=11, log_every=25),
            warmup_spec=warm_spec,
            warmup_episodes=warm_iters,
            reference_policy=opt.policy,
            metrics_factory=metrics_factory,
        )
        result = run_scheme(scheme, cfg)
        value = final_spec.policy_value(result.policy)
        last = result.logs[-1].rows[-1]
        print(f"{scheme:14s}: final reward {value:.4f} ({value / opt.value:.1%} of optimal), "
              f"ln_kappa at the end {last.ln_kappa:+.2f}  [{time.time() - tic:.0f}s]")
        csv = os.path.join(OUT, f"{scheme}.csv")
        _write_merged_csv(csv, result.logs)
        csvs.append(csv)

    write_combined_svg(csvs, os.path.join(OUT, "comparison.svg"))
    print(f"wrote {OUT}/comparison.svg (solid = curriculum, dashed = final phase only)")


if __name__ == "__main__":
    main()
