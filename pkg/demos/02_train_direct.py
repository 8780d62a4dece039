"""Direct natural-policy-gradient training on the classical secretary problem.

One on-policy run with the paper-style settings (learning rate 0.2, batch 100
per start step), no curriculum.  Logs the exact reward, condition number
against the optimal threshold policy, and residual fitting error every few
iterations, then writes the three-panel SVG next to this script.
"""

import math
import os

from lmdp_npg import (
    LogLinearPolicy,
    SecretarySpec,
    SpPolyFeatures,
    TrainConfig,
    fitting_error,
    kappa_empirical,
    npg_train,
    sp_generate_distribution,
    sp_optimal_policy_dp,
)
from lmdp_npg.plotting import write_combined_svg

OUT = os.path.join(os.path.dirname(__file__), "out_train_direct")


def main():
    cfg = sp_generate_distribution(10, classical=True)
    spec = SecretarySpec(cfg)
    opt = sp_optimal_policy_dp(cfg)
    print(f"optimal value: {opt.value:.4f}")

    features = SpPolyFeatures(4)

    def metrics(t, policy, g):
        kappa = kappa_empirical(spec, opt.policy, policy)  # on-policy Fisher form
        err = fitting_error(spec, opt.policy, policy, g)
        row = {
            "reward_mean": spec.policy_value(policy),
            "reward_ci95": 0.0,
            "ln_kappa": math.log(kappa) if kappa > 0 else -math.inf,
            "err": err,
        }
        if t % 50 == 0:
            print(f"iter {t:4d}: reward {row['reward_mean']:.4f} "
                  f"ln_kappa {row['ln_kappa']:+.2f} err {err:+.4f}")
        return row

    train = TrainConfig(eta=0.2, episodes=400, batch=100, seed=7, log_every=10)
    result = npg_train(spec, LogLinearPolicy(features), train, metrics_fn=metrics, mode="direct/final")

    final = spec.policy_value(result.policy)
    print(f"final reward: {final:.4f} ({final / opt.value:.1%} of optimal)")

    os.makedirs(OUT, exist_ok=True)
    csv = os.path.join(OUT, "log.csv")
    result.log.write_csv(csv)
    write_combined_svg([csv], os.path.join(OUT, "training.svg"))
    print(f"wrote {OUT}/log.csv and {OUT}/training.svg")


if __name__ == "__main__":
    main()
