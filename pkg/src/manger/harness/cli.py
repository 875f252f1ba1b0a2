"""Command-line front end: train, eval, diag, plot.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="manger", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    p_train = sub.add_parser("train", help="run a training configuration")
    p_train.add_argument("--config", required=True, help="key = value config file")
    p_train.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_train.add_argument("--outdir", default=None, help="override the config outdir")

    p_eval = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--env", required=True)
    p_eval.add_argument("--episodes", type=int, default=10)

    p_diag = sub.add_parser("diag", help="cross-agent Q-vector cosine matrix")
    p_diag.add_argument("--checkpoint", required=True)
    p_diag.add_argument("--probes", required=True,
                        help="CSV file with one observation vector per line")

    p_plot = sub.add_parser("plot", help="render metric curves to SVG")
    p_plot.add_argument("--in", dest="inputs", nargs="+", required=True)
    p_plot.add_argument("--key", required=True)
    p_plot.add_argument("--out", required=True)
    p_plot.add_argument("--mean", action="store_true", help="overlay the mean across files")
    return parser


def cli(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("a subcommand is required (train, eval, diag, plot)")
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _dispatch(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary maps failures to exit code 2
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.command == "train":
        from ..harness.config import parse_config
        from ..trainer import train

        config = parse_config(args.config)
        if args.seed is not None:
            config.seed = args.seed
        if args.outdir is not None:
            config.outdir = args.outdir
        result = train(config)
        last = result.rows[-1] if result.rows else None
        print(f"trained {config.algo} on {config.env}: "
              f"{last.train_step if last else 0} training steps, "
              f"metrics at {result.metrics_path}")
        return 0

    if args.command == "eval":
        from ..envs import make_env
        from ..harness.checkpoint import load_checkpoint
        from ..numcore import RngStream, STREAM_EVAL
        from ..trainer import evaluate, nets_from_payload

        payload = load_checkpoint(args.checkpoint)
        agent, _, _, obs_agent_id = nets_from_payload(payload)
        env = make_env(args.env)
        if agent.n_agents != env.n_agents or agent.n_actions != env.n_actions:
            raise ValueError(
                f"checkpoint was trained for {agent.n_agents} agents x "
                f"{agent.n_actions} actions, env {args.env} has "
                f"{env.n_agents} x {env.n_actions}")
        rng = RngStream(0, STREAM_EVAL)
        mean_return, success = evaluate(agent, env, args.episodes, rng, obs_agent_id)
        print(f"mean_return: {mean_return:.9g}")
        print(f"success_rate: {success:.9g}")
        return 0

    if args.command == "diag":
        from ..harness.checkpoint import load_checkpoint
        from ..harness.diag import diag_cosine
        from ..trainer import nets_from_payload

        payload = load_checkpoint(args.checkpoint)
        agent, _, _, obs_agent_id = nets_from_payload(payload)
        probes = np.loadtxt(args.probes, delimiter=",", ndmin=2)
        matrix, skipped = diag_cosine(agent, probes, obs_agent_id)
        for row in matrix:
            print(",".join(f"{v:.9g}" for v in row))
        if skipped:
            print(f"skipped_probes: {skipped}", file=sys.stderr)
        return 0

    if args.command == "plot":
        from ..harness.plotting import plot_curves

        plot_curves(args.inputs, [args.key], args.out, mean_overlay=args.mean)
        print(f"wrote {args.out}")
        return 0

    raise _UsageError(f"unknown command {args.command!r}")


def main() -> None:
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
