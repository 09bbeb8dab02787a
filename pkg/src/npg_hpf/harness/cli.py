#
# Copyright © 2026 Genome Research Ltd. All rights reserved.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.
#

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np
from npg.cli import add_logging_arguments
from npg.log import configure_structlog
from structlog import get_logger

import npg_hpf
from npg_hpf.config import ALGORITHMS, RUN_CONFIG_FILE_SECTION, RunConfig
from npg_hpf.envs import ENV_NAMES, make_env
from npg_hpf.harness.report import render_report
from npg_hpf.harness.runner import evaluate, make_controller
from npg_hpf.harness.training import load_run, run_training

log = get_logger(__package__)

description = """
This application trains and evaluates cooperative multi-agent value
decomposition learners, alone or fused in pairs, on a one-step matrix game and
on predator-prey gridworlds.

The application has three actions: 'train', 'eval' and 'report'.

In 'train' mode, a run is configured by the [RUN] section of an INI file. Any
key that is not set keeps its default, e.g.

    [RUN]
    algo = hpf-wq
    env = matrix
    seed = 1

Some keys may be overridden on the command line. The metrics log, the final
checkpoint and, for the matrix game, the learned payoff tables are written to
the output directory:

    <out>/metrics.csv
    <out>/checkpoint/manifest.yml
    <out>/payoff.txt

In 'eval' mode, the learners saved in a checkpoint play test episodes and the
median and quartiles of their returns are printed to STDOUT.

In 'report' mode, a plain-text report of a finished run (the learning curve
and any payoff tables) is written to <run>/report.txt and printed to STDOUT.
"""


def add_train_arguments(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--config",
        type=str,
        required=True,
        help="Run configuration file path.",
    )
    parser.add_argument("--seed", type=int, help="Override the random seed.")
    parser.add_argument(
        "--algo", type=str, choices=ALGORITHMS, help="Override the algorithm."
    )
    parser.add_argument(
        "--env", type=str, choices=ENV_NAMES, help="Override the environment."
    )
    parser.add_argument(
        "--steps",
        type=int,
        help="Override the number of environment steps to train for.",
    )
    parser.add_argument(
        "--out",
        type=str,
        default="run",
        help="The output directory. Defaults to ./run.",
    )


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description=description,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "--version",
        help="Print the version and exit.",
        action="version",
        version=npg_hpf.version(),
    )
    add_logging_arguments(parser)

    actions = parser.add_subparsers(dest="action", required=True)

    train = actions.add_parser("train", help="Train a learner or a fused pair.")
    add_train_arguments(train)

    ev = actions.add_parser("eval", help="Evaluate the learners of a checkpoint.")
    ev.add_argument(
        "--checkpoint",
        type=str,
        required=True,
        help="A checkpoint directory written by 'train'.",
    )
    ev.add_argument(
        "--episodes",
        type=int,
        default=16,
        help="The number of test episodes. Defaults to 16.",
    )

    report = actions.add_parser("report", help="Report on a finished run.")
    report.add_argument(
        "--run",
        type=str,
        required=True,
        help="A run directory written by 'train'.",
    )

    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """Load the run configuration and apply command line overrides."""
    config = RunConfig.from_file(args.config, RUN_CONFIG_FILE_SECTION)
    overrides = {
        "seed": args.seed,
        "algo": args.algo,
        "env": args.env,
        "max_steps": args.steps,
    }
    return dataclasses.replace(
        config, **{k: v for k, v in overrides.items() if v is not None}
    )


def train(args: argparse.Namespace):
    config = load_config(args)
    artifacts = run_training(config, out_dir=Path(args.out))
    log.info(
        "Completed train",
        run_dir=str(artifacts.run_dir),
        step=artifacts.final.step,
        test_return_median=artifacts.final.test_return_median,
    )


def evaluate_checkpoint(args: argparse.Namespace):
    config, learners = load_run(args.checkpoint)
    controller = make_controller(learners, config.test_policy)
    stats = evaluate(
        controller,
        make_env(config.env),
        args.episodes,
        np.random.default_rng(config.seed),
        epsilon=config.eval_epsilon,
    )
    log.info("Completed eval", checkpoint=args.checkpoint, returns=str(stats))
    print(stats)


def report(args: argparse.Namespace):
    print(render_report(args.run), end="")
    log.info("Completed report", run_dir=args.run)


def main():
    parser = make_parser()
    args = parser.parse_args()
    configure_structlog(
        config_file=args.log_config,
        debug=args.debug,
        verbose=args.verbose,
        colour=args.colour,
        json=args.json,
    )

    actions = {"train": train, "eval": evaluate_checkpoint, "report": report}
    try:
        actions[args.action](args)
    except Exception as e:
        log.exception(e)
        log.error(f"Failed to {args.action}", action=args.action)
        sys.exit(1)


if __name__ == "__main__":
    main()
