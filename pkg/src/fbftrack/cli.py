"""Command-line interface.

Subcommands: ``run``, ``validate``, ``sweep``, and ``oracle`` (reference
computations for regenerating recorded expectations). Exit codes: 0 ok,
1 configuration error, 2 runtime abort (including divergence cutoff),
3 stability halt.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import ConfigError, load_config, parse_config_text, _parse_scalar
from .harness import (EXIT_CONFIG, EXIT_RUNTIME, run_experiment, summarize,
                      sweep)
from . import oracles
from .hybrid import HybridConfig, build_lift_batch, build_lift_window
from .lifted import discretize_zoh, impulse_response


def _add_config_arg(sub):
    sub.add_argument("config", help="experiment config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbftrack",
        description="Feedforward tracking experiments with filtered basis "
                    "functions and an online-learned correction model")
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="run one experiment")
    _add_config_arg(p_run)
    p_run.add_argument("--output", help="output prefix override")

    p_val = subs.add_parser("validate", help="check a config and exit")
    _add_config_arg(p_val)

    p_sweep = subs.add_parser("sweep", help="run one experiment per value")
    _add_config_arg(p_sweep)
    p_sweep.add_argument("--param", required=True,
                         help="key=v1,v2,... (e.g. plant.noise_sigma=0,0.001)")
    p_sweep.add_argument("--output", help="output prefix override")
    p_sweep.add_argument("--jobs", type=int, default=None)

    p_or = subs.add_parser("oracle", help="reference computations")
    or_subs = p_or.add_subparsers(dest="oracle_command", required=True)

    o_rms = or_subs.add_parser("rms", help="recompute RMS from a steps CSV")
    o_rms.add_argument("csv")
    o_rms.add_argument("--column", default="e")
    o_rms.add_argument("--start-step", type=int, default=0)

    o_step = or_subs.add_parser(
        "step-response",
        help="worst relative deviation of the discretized step response "
             "from the continuous closed form")
    _add_config_arg(o_step)
    o_step.add_argument("--steps", type=int, default=1000)

    o_pou = or_subs.add_parser(
        "bspline-sum", help="worst partition-of-unity error of the basis")
    _add_config_arg(o_pou)
    o_pou.add_argument("--horizon", type=int, default=None)

    o_lift = or_subs.add_parser(
        "lift-check",
        help="max |lift - recursion| over random weights, both scopes")
    _add_config_arg(o_lift)
    o_lift.add_argument("--trials", type=int, default=20)
    o_lift.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    code, metrics, _ = run_experiment(cfg, output_prefix=args.output)
    print(f"rms_error_total = {metrics.rms_error_total:.6g}")
    print(f"rms_error_post_warmup = {metrics.rms_error_post_warmup:.6g}")
    print(f"max_spectral_radius = {metrics.max_spectral_radius:.6g}")
    if metrics.alarm_window is not None:
        print(f"alarm_window = {metrics.alarm_window}")
    if metrics.diverged_window is not None:
        print(f"diverged_window = {metrics.diverged_window}")
    if metrics.halted:
        print("halted = true")
    return code


def _cmd_validate(args) -> int:
    load_config(args.config)
    print("config ok")
    return 0


def _cmd_sweep(args) -> int:
    key, _, rest = args.param.partition("=")
    if not rest:
        print("--param must look like key=v1,v2,...", file=sys.stderr)
        return EXIT_CONFIG
    sweep_values = [_parse_scalar(tok) for tok in rest.split(",")]
    results = sweep(args.config, key.strip(), sweep_values,
                    output_prefix=args.output, jobs=args.jobs)
    worst = 0
    for value, code, metrics in results:
        print(f"{key} = {value}: exit {code}, "
              f"rms_post_warmup = {metrics.rms_error_post_warmup:.6g}")
        worst = max(worst, code)
    return worst


def _lift_check(cfg, trials: int, seed: int) -> float:
    hc = cfg.hybrid
    n = hc.batch_len
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        w = rng.normal(size=hc.feature_len) * 0.05
        for scope, n_ypb, n_out in (("batch", 2, 1), ("window", 4, 2)):
            lift = (build_lift_batch(hc, w) if scope == "batch"
                    else build_lift_window(hc, w))
            ypb = rng.normal(size=n_ypb * n)
            e_tail = rng.normal(size=hc.p)
            # the recursion spans everything past the first (stored) batch
            got = lift.apply(ypb[(n_ypb - n_out) * n:],
                             ypb[:(n_ypb - n_out) * n], e_tail)
            ref = oracles.reference_hybrid_prediction(
                hc.q, hc.p, w, ypb[n - hc.q + 1:n], e_tail, ypb[n:])
            worst = max(worst, float(np.abs(got - ref[-n_out * n:]).max()))
    return worst


def _cmd_oracle(args) -> int:
    if args.oracle_command == "rms":
        print(f"{oracles.csv_rms(args.csv, args.column, args.start_step):.17g}")
        return 0
    cfg = load_config(args.config)
    if args.oracle_command == "step-response":
        model = discretize_zoh(cfg.plant.nominal, cfg.ts)
        cont = oracles.continuous_step_response(cfg.plant.nominal, cfg.ts,
                                                args.steps)
        disc = np.cumsum(impulse_response(model, args.steps))
        scale = max(np.abs(cont).max(), np.finfo(float).tiny)
        print(f"{np.abs(disc - cont).max() / scale:.3e}")
        return 0
    if args.oracle_command == "bspline-sum":
        horizon = args.horizon or 4 * cfg.basis.window_len
        print(f"{oracles.partition_of_unity_error(cfg.basis, horizon):.3e}")
        return 0
    if args.oracle_command == "lift-check":
        print(f"{_lift_check(cfg, args.trials, args.seed):.3e}")
        return 0
    raise AssertionError("unreachable")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": _cmd_run, "validate": _cmd_validate,
                "sweep": _cmd_sweep, "oracle": _cmd_oracle}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
