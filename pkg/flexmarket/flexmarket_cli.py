# -*- coding: utf-8 -*-
#
# Copyright (c) 2021 CS GROUP - France.
#
# This file is part of FlexMarket.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#
"""
FlexMarket command line

:organization: CS GROUP - France
:copyright: 2021 CS GROUP - France. All rights reserved.
:license: see LICENSE file.
"""

import argparse
import logging
import sys

from flexmarket import flexmarket_module
from flexmarket.exceptions import ConfigurationError, SimulationError
from flexmarket.simulation.config import SETTINGS
from flexmarket.utils import parse_list


def build_parser():
    """Creates a parser suitable for parsing a command line invoking this program.

    :return: An parser.
    :rtype: :class:`argparse.ArgumentParser`
    """
    parser = argparse.ArgumentParser(description="Agent-based energy and reserve market simulator")

    parser.add_argument("command", choices=flexmarket_module.COMMANDS, help="What to do")
    parser.add_argument("manifest", nargs="?", help="Manifest of the run to replay")
    parser.add_argument("--config", help="Configuration file overriding the packaged defaults")
    parser.add_argument("--seed", type=int, help="Seed of the scenario (or of the random loads for verify)")
    parser.add_argument("--rate", type=float, help="Flexibility rate, in [0, 1]")
    parser.add_argument("--setting", choices=SETTINGS, help="Market setting")
    parser.add_argument("--out-dir", help="Output directory")
    parser.add_argument("--max-rounds", type=int, help="Maximum number of rounds")
    parser.add_argument(
        "--rates",
        type=parse_list,
        help="Comma separated flexibility rates of a sweep, e.g. 0,0.02,0.04",
    )
    parser.add_argument("--jobs", type=int, default=1, help="Parallel sweep cells")
    parser.add_argument("--samples", type=int, default=1000, help="Random activations per load (verify)")
    parser.add_argument("--loads", type=int, default=20, help="Number of random loads (verify)")

    parser.add_argument("-v", "--verbose", action="count", help="Increase output verbosity")

    parser.add_argument("-logger_file", help="Redirect information from standard output to a file")

    return parser


def report_outcome(outcome, user_logger):
    user_logger.info("--- Summary ---")
    if outcome.cycle_start is not None:
        user_logger.info(
            "Terminated by %s after %s rounds (rounds %s to %s repeat)",
            outcome.termination,
            outcome.rounds,
            outcome.cycle_start,
            outcome.cycle_start + outcome.cycle_length - 1,
        )
    else:
        user_logger.info("Terminated by %s after %s rounds", outcome.termination, outcome.rounds)
    for name, value in outcome.summary.items():
        user_logger.info("- %s: %.4f", name, value)


def main(arguments=None):
    """
    Command line interface to perform

    :param list arguments: list of arguments
    :return: exit status
    """
    arg_parser = build_parser()
    args = arg_parser.parse_args(args=arguments)
    if args.command == flexmarket_module.REPLAY and args.manifest is None:
        arg_parser.error("replay needs a manifest")
    try:
        result = flexmarket_module.main(
            args.command,
            args.config,
            args.out_dir,
            args.seed,
            args.rate,
            args.setting,
            args.max_rounds,
            args.rates,
            args.jobs,
            args.samples,
            args.loads,
            args.manifest,
            args.verbose,
            args.logger_file,
        )
    except (ConfigurationError, SimulationError) as error:
        logging.getLogger("user_logger").error("Error: %s", error)
        return 1
    user_logger = logging.getLogger("user_logger")

    # Outputting the result
    if args.command == flexmarket_module.VERIFY:
        failures = sum(report.failures for report in result)
        for number, report in enumerate(result, start=1):
            if not report.passed:
                user_logger.info("- load %s: %s failures, first: %s", number, report.failures, report.message)
        user_logger.info("--- Summary ---")
        user_logger.info("%s loads, %s activations each, %s failures", len(result), args.samples, failures)
        return 0 if failures == 0 else 1
    if args.command == flexmarket_module.SWEEP:
        user_logger.info("--- Summary ---")
        for row in result.itertuples(index=False):
            user_logger.info(
                "- rate %.3f %s: %s, mean MCP %.3f, procurement %.2f, non-contracted %.3f MWh",
                row.rate,
                row.setting,
                row.termination,
                row.mean_mcp,
                row.procurement_cost,
                row.non_contracted_mwh,
            )
        for row in flexmarket_module.sweep_trends(result).itertuples(index=False):
            user_logger.info(
                "- %s: non-contracted volume trend %.3f over %s cells", row.setting, row.non_contracted_trend, row.cells
            )
        return 0 if (result["termination"] != "failed").all() else 1
    report_outcome(result, user_logger)
    return 0


if __name__ == "__main__":
    sys.exit(main())
