"""Command-line entry points.

Subcommands:

* ``run``      -- execute the training schemes of an experiment config,
                  writing per-scheme CSV logs, checkpoints and a combined SVG.
* ``plot``     -- re-render the combined SVG from existing CSV logs.
* ``analyze``  -- condition-number report for a checkpoint (closed-form and/or
                  empirical), as JSON on stdout.
* ``oracle``   -- exact values for an environment config: optimal policy and
                  value (secretary), plus the closed-form kappa table for a
                  supplied sampler threshold.

Scheme-level parallelism comes from ``--workers`` (or LMDP_NPG_WORKERS); the
outputs are identical for any worker count.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .analysis import KappaReport, kappa_closed_form_sp, kappa_empirical
from .curriculum import SCHEMES
from .envs.secretary import SecretarySpec, SpConfig, sp_optimal_policy_dp
from .experiment import (
    ExperimentConfig,
    env_config_from_dict,
    load_checkpoint,
    make_spec,
    run_experiment,
)
from .plotting import CsvSchemaError, write_combined_svg
from .policies import NaiveRandomPolicy
from .envs.secretary import ThresholdPolicy


def _load_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def cmd_run(args) -> int:
    try:
        x = ExperimentConfig.load(args.config)
    except (OSError, ValueError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        x.seed = args.seed
    if args.scheme:
        unknown = [s for s in args.scheme if s not in SCHEMES]
        if unknown:
            print(f"error: unknown schemes {unknown}", file=sys.stderr)
            return 1
        x.schemes = list(args.scheme)
    if not x.schemes:
        print("warning: no schemes requested; nothing to do", file=sys.stderr)
        return 0
    out_dir = args.out or os.path.join(".", x.name)
    workers = args.workers or int(os.environ.get("LMDP_NPG_WORKERS", "1"))
    from .experiment import ExperimentFailure

    try:
        outputs = run_experiment(x, out_dir, workers=workers)
    except ExperimentFailure as exc:
        for out in exc.outputs:
            print(f"{out.scheme}: final value {out.final_value:.4f} +- {out.final_ci95:.4f}")
        print(f"error: {exc} (completed schemes kept under {out_dir})", file=sys.stderr)
        return 1
    for out in outputs:
        print(f"{out.scheme}: final value {out.final_value:.4f} +- {out.final_ci95:.4f}")
    csvs = [out.csv_path for out in outputs if out.csv_path]
    if csvs:
        svg = os.path.join(out_dir, "combined.svg")
        write_combined_svg(csvs, svg)
        print(f"wrote {svg}")
    return 0


def cmd_plot(args) -> int:
    try:
        write_combined_svg(args.csv, args.out)
    except CsvSchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


def cmd_analyze(args) -> int:
    policy, env_dict, meta = load_checkpoint(args.checkpoint)
    env_config = env_config_from_dict(_load_json(args.env) if args.env else env_dict)
    spec = make_spec(env_config)

    k_lower = k_upper = None
    empirical = None
    if args.mode in ("closed", "both"):
        if not isinstance(env_config, SpConfig):
            print("error: closed-form kappa exists only for secretary configs", file=sys.stderr)
            return 1
        if args.q is None:
            print("error: --q (sampler threshold) required for closed-form kappa", file=sys.stderr)
            return 1
        opt = sp_optimal_policy_dp(env_config)
        forms = kappa_closed_form_sp(env_config.p_series, opt.policy.threshold, args.q)
        k_lower = forms.k_curl if args.sampler == "threshold" else forms.k_naive
        k_upper = 2.0 * k_lower
    if args.mode in ("empirical", "both"):
        if args.sampler == "threshold":
            if args.q is None:
                print("error: --q required for a threshold sampler", file=sys.stderr)
                return 1
            sampler = ThresholdPolicy(args.q)
        elif args.sampler == "naive":
            sampler = NaiveRandomPolicy()
        else:
            sampler = None  # on-policy
        reference = sp_optimal_policy_dp(env_config).policy if isinstance(env_config, SpConfig) \
            else None
        if reference is None:
            from .experiment import reference_for

            reference = reference_for(env_config, spec, meta.get("seed", 0)).policy
        kwargs = {}
        if not isinstance(spec, SecretarySpec):
            kwargs = {"mc_episodes": args.mc_episodes, "seed": meta.get("seed", 0)}
        empirical = kappa_empirical(spec, reference, policy, sampler=sampler,
                                    ridge=args.ridge, **kwargs)

    report = KappaReport(k_lower, k_upper, empirical, [float(v) for v in policy.theta])
    print(json.dumps(report.to_json_dict()))
    return 0


def cmd_oracle(args) -> int:
    env_config = env_config_from_dict(_load_json(args.config))
    if not isinstance(env_config, SpConfig):
        print("error: exact oracle is only available for secretary configs "
              "(the knapsack decision problem has no tractable optimal policy)", file=sys.stderr)
        return 1
    opt = sp_optimal_policy_dp(env_config)
    out = {
        "optimal_value": opt.value,
        "policy": f"accept best-so-far from position {opt.accept_from} of {env_config.n}",
        "threshold": opt.policy.threshold,
    }
    if args.q is not None:
        forms = kappa_closed_form_sp(env_config.p_series, opt.policy.threshold, args.q)
        enc = lambda v: "inf" if math.isinf(v) else v
        out["kappa"] = {
            "q": args.q,
            "k_curl": enc(forms.k_curl),
            "k_curl_upper": enc(2 * forms.k_curl),
            "k_naive": enc(forms.k_naive),
            "k_naive_upper": enc(2 * forms.k_naive),
        }
    print(json.dumps(out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lmdp-npg", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None, help="override the master seed")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--scheme", action="append", default=None,
                       help="restrict to this scheme (repeatable)")
    p_run.add_argument("--workers", type=int, default=None)
    p_run.set_defaults(fn=cmd_run)

    p_plot = sub.add_parser("plot", help="render CSV logs to a combined SVG")
    p_plot.add_argument("csv", nargs="+")
    p_plot.add_argument("--out", required=True)
    p_plot.set_defaults(fn=cmd_plot)

    p_an = sub.add_parser("analyze", help="kappa report for a checkpoint")
    p_an_sub = p_an.add_subparsers(dest="what", required=True)
    p_kappa = p_an_sub.add_parser("kappa")
    p_kappa.add_argument("--checkpoint", required=True)
    p_kappa.add_argument("--env", default=None, help="environment JSON (defaults to checkpoint's)")
    p_kappa.add_argument("--mode", choices=("closed", "empirical", "both"), default="both")
    p_kappa.add_argument("--sampler", choices=("threshold", "naive", "on-policy"),
                         default="naive")
    p_kappa.add_argument("--q", type=float, default=None, help="sampler threshold")
    p_kappa.add_argument("--ridge", type=float, default=1e-10)
    p_kappa.add_argument("--mc-episodes", type=int, default=20000)
    p_kappa.set_defaults(fn=cmd_analyze)

    p_or = sub.add_parser("oracle", help="exact optimal value / closed-form kappa table")
    p_or.add_argument("--config", required=True, help="environment JSON")
    p_or.add_argument("--q", type=float, default=None, help="sampler threshold for the kappa table")
    p_or.set_defaults(fn=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
