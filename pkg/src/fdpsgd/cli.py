"""Command-line interface.

Subcommands: `account` (guarantee bundle for a sampler configuration),
`qdist` (closed-form c^2 distribution), `train` (desk-scale run),
`verify` (Monte Carlo oracle matrix) and `compare-group` (direct vs
iterated group privacy curves).  Floating-point output uses 12
significant digits; the FDP_SEED environment variable overrides any
configured seed.  Exit codes: 0 success, 1 validation error, 2
numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .curves import default_alphas
from .engine import AnalyzeOptions, UnsupportedConfigError, analyze, compare_group_paths
from .mixture import NoConvergenceError
from .sampling import (
    SamplerConfig,
    epoch_convolve,
    general_round_dist,
    multiround_cdist,
    qdist_bc_shuffling,
    CVecDist,
)
from .trainer import TrainConfig, load_dataset_csv, metrics_to_csv, train
from .verify import run_verification

__all__ = ["main"]


def _round_floats(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def _dump_json(obj) -> str:
    return json.dumps(_round_floats(obj), indent=2)


def _sampler_args(p, need_sigma=True):
    p.add_argument("--strategy", required=True, choices=["ss", "sh"])
    p.add_argument("--clipping", required=True, choices=["ic", "bc", "gen"])
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--s", type=int, default=1)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--E", type=int, default=1)
    p.add_argument("--g", type=int, default=1)
    if need_sigma:
        p.add_argument("--sigma", type=float, required=True)


def _config_from(args) -> SamplerConfig:
    return SamplerConfig(
        N=args.N,
        s=args.s,
        m=args.m,
        E=args.E,
        g=args.g,
        strategy=args.strategy.upper(),
        clipping=args.clipping.upper(),
    )


def _cmd_account(args) -> int:
    config = _config_from(args)
    opts = AnalyzeOptions(gamma=args.gamma, grid_size=args.grid_size)
    bundle = analyze(config, args.sigma, opts)
    if args.format == "csv" or args.csv:
        sys.stdout.write(bundle.to_csv())
    else:
        sys.stdout.write(_dump_json(bundle.to_json_dict()) + "\n")
    return 0


def _closed_form_cdist(config: SamplerConfig) -> CVecDist:
    total_rounds = config.rounds_per_epoch * config.E
    if config.strategy == "SS":
        if config.clipping == "IC":
            round_dist = general_round_dist(config.N, config.m, 1, config.g)
        else:
            round_dist = general_round_dist(config.N, config.m, config.s, config.g)
        return multiround_cdist(round_dist, total_rounds)
    if config.g == 1:
        probs = np.zeros(config.E + 1)
        probs[config.E] = 1.0
        return CVecDist(probs)
    if config.clipping == "BC":
        per_epoch = qdist_bc_shuffling(config.N, config.s, config.g)
        return epoch_convolve(per_epoch, config.E)
    raise UnsupportedConfigError(
        "no closed-form c^2 distribution for shuffling with g >= 2 outside "
        "batch clipping"
    )


def _cmd_qdist(args) -> int:
    config = _config_from(args)
    dist = _closed_form_cdist(config)
    if args.format == "json":
        sys.stdout.write(_dump_json(json.loads(dist.to_json())) + "\n")
    else:
        sys.stdout.write(dist.to_csv())
    return 0


def _cmd_train(args) -> int:
    if not os.path.exists(args.config):
        print(f"config file not found: {args.config}", file=sys.stderr)
        return 1
    with open(args.config) as fh:
        raw = json.load(fh)
    sampler = SamplerConfig(
        N=raw["N"],
        s=raw.get("s", 1),
        m=raw.get("m", 1),
        E=raw.get("E", 1),
        g=raw.get("g", 1),
        strategy=raw.get("strategy", "SH").upper(),
        clipping=raw.get("clipping", "BC").upper(),
    )
    seed = int(os.environ.get("FDP_SEED", raw.get("seed", 20240)))
    config = TrainConfig(
        sampler=sampler,
        sigma=args.sigma if args.sigma is not None else raw.get("sigma", 0.0),
        clip_C=args.clip_C if args.clip_C is not None else raw.get("clip_C", 1.0),
        eta0=args.eta0 if args.eta0 is not None else raw.get("eta0", 0.025),
        lr_decay=raw.get("lr_decay", 0.9),
        seed=seed,
        noise_scale_mode=raw.get("noise_scale_mode", "two_c"),
        inner=raw.get("inner"),
        loss_kind=raw.get("loss_kind", "logistic"),
    )
    if not os.path.exists(args.data):
        print(f"data file not found: {args.data}", file=sys.stderr)
        return 1
    X, y, _ = load_dataset_csv(args.data)
    model, metrics = train(config, (X, y))
    sys.stdout.write(metrics_to_csv(metrics))
    model_json = _dump_json(
        {"weights": model.weights.tolist(), "loss_kind": model.loss_kind}
    )
    if args.model_out:
        with open(args.model_out, "w") as fh:
            fh.write(model_json + "\n")
    else:
        print(model_json, file=sys.stderr)
    return 0


def _cmd_verify(args) -> int:
    seed = int(os.environ.get("FDP_SEED", args.seed))
    report = run_verification(trials=args.trials, seed=seed, workers=args.workers)
    sys.stdout.write(_dump_json(report) + "\n")
    return 0 if report["passed"] else 2


def _cmd_compare_group(args) -> int:
    config = _config_from(args)
    rep = compare_group_paths(config, args.sigma, n=args.grid_size)
    a = default_alphas(args.points)
    direct = rep["direct"](a)
    iterated = rep["iterated"](a)
    sys.stdout.write("alpha,direct,iterated\n")
    for x, d, i in zip(a, direct, iterated):
        sys.stdout.write(f"{x:.12g},{d:.12g},{i:.12g}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdpsgd",
        description="f-DP guarantees for clipped-gradient SGD with "
        "subsampling or shuffling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("account", help="guarantee bundle for a configuration")
    _sampler_args(p)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--csv", action="store_true", help="shorthand for --format csv")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--grid-size", type=int, default=4097, dest="grid_size")
    p.set_defaults(func=_cmd_account)

    p = sub.add_parser("qdist", help="closed-form c^2 distribution")
    _sampler_args(p, need_sigma=False)
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    p.set_defaults(func=_cmd_qdist)

    p = sub.add_parser("train", help="desk-scale training run")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--data", required=True, help="CSV dataset, last column label")
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--clip-C", type=float, default=None, dest="clip_C")
    p.add_argument("--eta0", type=float, default=None)
    p.add_argument("--model-out", default=None, dest="model_out")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("verify", help="Monte Carlo oracle matrix")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=20240)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("compare-group", help="direct vs iterated group curves")
    _sampler_args(p)
    p.add_argument("--grid-size", type=int, default=4097, dest="grid_size")
    p.add_argument("--points", type=int, default=257)
    p.set_defaults(func=_cmd_compare_group)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, UnsupportedConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NoConvergenceError, FloatingPointError, AssertionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
