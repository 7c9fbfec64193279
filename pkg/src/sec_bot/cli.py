"""Command-line entry point: train, evaluate, report, verify."""
from __future__ import annotations

import argparse
import logging
import sys

import yaml

from .errors import SecError
from .experiments import LEVELS, ExperimentConfig, evaluate, train
from .report import build_report
from .verify import verify_results


def _seeds(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in text.split(","))


def _level(text: str) -> tuple[int, ...]:
    if text == "all":
        return LEVELS
    level = int(text)
    if level not in LEVELS:
        raise argparse.ArgumentTypeError(f"level must be all or 1..5, got {text}")
    return (level,)


def _set(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key, value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sec-bot", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML key-value file")
    common.add_argument("--out", dest="output_dir", help="results directory")
    common.add_argument("--seeds", type=_seeds, help="comma-separated seeds")
    common.add_argument("--ticks", dest="game_ticks", type=int)
    common.add_argument("--set", dest="overrides", type=_set, action="append", default=[],
                        metavar="KEY=VALUE", help="override any config key")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train and build the catalogues")
    p.add_argument("--games", dest="train_games", type=int)

    p = sub.add_parser("evaluate", parents=[common], help="play evaluation games")
    p.add_argument("--mode", choices=("sec", "rl-only"), required=True)
    p.add_argument("--level", type=_level, default=LEVELS, help="all or 1..5")
    p.add_argument("--games", dest="eval_games", type=int)

    p = sub.add_parser("report", help="render summaries and charts")
    p.add_argument("--out", dest="output_dir", default="results")

    p = sub.add_parser("verify", help="check a results directory for consistency")
    p.add_argument("--out", dest="output_dir", default="results")
    return parser


def _config(args) -> ExperimentConfig:
    overrides = {k: yaml.safe_load(v) for k, v in args.overrides}
    for key in ("output_dir", "seeds", "game_ticks", "train_games", "eval_games"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    return ExperimentConfig.load(args.config, **overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "train":
            config = _config(args)
            runs = train(config)
            for seed, run in runs.items():
                line = f"seed {seed}: {run.deaths} deaths, {len(run.catalogue)} milestones"
                if len(run.games) >= 8:
                    qc = run.quartiles()
                    line += (f", Q1 KD {qc.q1_mean:.3f} ({qc.q1_se:.3f}) Q4 KD {qc.q4_mean:.3f}"
                             f" ({qc.q4_se:.3f}) p={qc.test.p_value:.3g}")
                print(line)
        elif args.command == "evaluate":
            config = _config(args)
            stats = evaluate(config, args.mode, args.level)
            for level, s in stats.items():
                print(f"{args.mode} level {level}: KD {s.kd_ratio:.3f} W/L/D {s.wins}/{s.losses}/{s.draws}"
                      f" up {s.adjustments_up} down {s.adjustments_down} clear {s.clearances}")
        elif args.command == "report":
            for path in build_report(args.output_dir):
                print(path)
        else:
            return 0 if verify_results(args.output_dir) else 1
    except (SecError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
