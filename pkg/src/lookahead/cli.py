"""Command-line pipeline driver: demos -> prior -> reward -> evaluation.

Every subcommand reads one JSON config and writes its artifacts into the
--out directory. Exit codes: 0 on success, 1 on a domain error (the error
name goes to stderr), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .bench import (
    BenchReport,
    RunConfig,
    ablate_reward,
    ablate_sampling,
    demo_prior,
    demo_reward_data,
    demo_reward_model,
    generate_demos,
    load_demos,
    run_benchmark,
    sweep_alpha,
    sweep_model_error,
    write_report,
)
from .errors import DataError, StateError
from .kde import load_prior, save_prior
from .reward import load_model, save_model

log = logging.getLogger("lookahead")

COMMANDS = (
    "gen-data",
    "fit-prior",
    "fit-reward",
    "run",
    "sweep-alpha",
    "ablate-sampling",
    "ablate-reward",
    "sweep-model-error",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lookahead",
        description="Deterministic pipeline for search-corrected policy evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="|".join(COMMANDS))
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", default="out", help="artifact directory (default ./out)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's base seed (demo seed for gen-data)")
        p.add_argument("--quiet", action="store_true", help="suppress progress logging")
    return parser


def _load_config(parser: argparse.ArgumentParser, args: argparse.Namespace) -> RunConfig:
    path = Path(args.config)
    if not path.is_file():
        parser.error(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        parser.error(f"config is not valid JSON: {exc}")
    try:
        config = RunConfig.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        parser.error(f"invalid config: {exc}")
    if args.seed is not None:
        if args.command == "gen-data":
            config = dataclasses.replace(config, demo_seed=args.seed)
        else:
            config = dataclasses.replace(config, base_seed=args.seed)
    return config


def _summary(report: BenchReport) -> str:
    parts = [f"{a.arm}[alpha={a.alpha:g},eps={a.epsilon:g}]={a.success_rate:.3f}"
             for a in report.arms]
    line = f"{report.kind}: " + " ".join(parts)
    if report.paired_diff is not None:
        line += f" paired_diff={report.paired_diff:+.3f}"
    return line


def _artifacts(out: Path, config: RunConfig):
    demos = out / "demos.jsonl"
    if not demos.is_file():
        raise DataError(f"missing {demos}; run gen-data first")
    return load_demos(demos)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    config = _load_config(parser, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    try:
        if args.command == "gen-data":
            stats = generate_demos(config.task, config.demo_count, config.demo_seed,
                                   out / "demos.jsonl", out / "failures.jsonl")
            print(f"kept {stats['kept']}/{stats['attempted']} demos -> {out / 'demos.jsonl'}")
            return 0

        if args.command == "fit-prior":
            trajs = _artifacts(out, config)
            prior = demo_prior(trajs, chunk_len=config.policy.chunk_len,
                               bandwidth=config.prior_bandwidth)
            save_prior(prior, out / "prior.json")
            print(f"prior: {prior.n_points} points, dim={prior.dim}, "
                  f"bandwidth={prior.bandwidth:.6g} ({prior.bandwidth_rule}) -> {out / 'prior.json'}")
            return 0

        if args.command == "fit-reward":
            trajs = _artifacts(out, config)
            model = demo_reward_model(trajs, config.reward_stride, config.ridge_lambda,
                                      task_kind=config.task.task_id)
            save_model(model, out / "reward.json")
            print(f"reward: {model.weights.size} weights, train_mse={model.train_mse:.6g} "
                  f"-> {out / 'reward.json'}")
            return 0

        # evaluation commands need both fitted artifacts
        prior_path, reward_path = out / "prior.json", out / "reward.json"
        if not prior_path.is_file():
            raise DataError(f"missing {prior_path}; run fit-prior first")
        if not reward_path.is_file():
            raise DataError(f"missing {reward_path}; run fit-reward first")
        prior = load_prior(prior_path)
        model = load_model(reward_path)

        if args.command == "run":
            report = run_benchmark(config, prior, model)
            write_report(report, out / "report.json", out / "report.csv")
        elif args.command == "sweep-alpha":
            report = sweep_alpha(config, prior, model)
            write_report(report, out / "alpha_sweep.json", out / "alpha_sweep.csv")
        elif args.command == "ablate-sampling":
            report = ablate_sampling(config, prior, model)
            write_report(report, out / "sampling_ablation.json", out / "sampling_ablation.csv")
        elif args.command == "ablate-reward":
            trajs = _artifacts(out, config)
            bank = demo_reward_data(trajs, config.reward_stride)
            report = ablate_reward(config, prior, model, bank)
            write_report(report, out / "reward_ablation.json", out / "reward_ablation.csv")
        else:  # sweep-model-error
            report = sweep_model_error(config, prior, model)
            write_report(report, out / "model_error_sweep.json", out / "model_error_sweep.csv")

        print(_summary(report))
        return 0
    except (DataError, StateError, ValueError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
