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
FlexMarket python API: single runs, flexibility-rate sweeps, scenario
coverage checks and replays of a manifest.

:organization: CS GROUP - France
:copyright: 2021 CS GROUP - France. All rights reserved.
:license: see LICENSE file.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Sequence

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

from flexmarket.agents.coverage import CoverageReport, coverage_trial
from flexmarket.exceptions import ConfigurationError, SimulationError
from flexmarket.simulation.config import CLOSED, OPEN, ScenarioConfig, load_config
from flexmarket.simulation.outputs import SWEEP_COLUMNS, TREND_COLUMNS, read_manifest, write_run, write_sweep
from flexmarket.simulation.simulator import METRIC_NAMES, SimulationOutcome
from flexmarket.simulation.simulator import run as simulate
from flexmarket.utils import build_logger, verbosity_to_level

dev_logger = logging.getLogger("dev_logger")

RUN = "run"
SWEEP = "sweep"
VERIFY = "verify"
REPLAY = "replay"
COMMANDS = (RUN, SWEEP, VERIFY, REPLAY)

DEFAULT_RATES = [0.0, 0.02, 0.04, 0.06, 0.08, 0.10]


def run(config: ScenarioConfig, out_dir=None) -> SimulationOutcome:
    """
    Simulates one configuration

    :param config: the scenario configuration
    :param out_dir: [Optional] directory receiving metrics, manifest and figures
    :raises SimulationError: when a round cannot be completed
    """
    outcome = simulate(config)
    if out_dir is not None:
        write_run(config, outcome, out_dir)
    return outcome


def _cell_directory(out_dir, rate, setting):
    return Path(out_dir) / "{}_rate_{:.4f}".format(setting, rate)


def _sweep_cell(config: ScenarioConfig, rate, setting, out_dir):
    row = {"rate": rate, "setting": setting, "error": ""}
    try:
        cell_config = config.with_values(flexibility_rate=rate, setting=setting)
        directory = None if out_dir is None else _cell_directory(out_dir, rate, setting)
        outcome = run(cell_config, directory)
    except (SimulationError, ConfigurationError) as error:
        dev_logger.error("Sweep cell rate %s, setting %s failed: %s", rate, setting, error)
        row.update({"termination": "failed", "rounds": 0, "error": str(error)})
        row.update({name: math.nan for name in METRIC_NAMES})
        return row
    row.update(
        {
            "termination": outcome.termination,
            "rounds": outcome.rounds,
            "cycle_start": outcome.cycle_start,
            "cycle_length": outcome.cycle_length,
        }
    )
    row.update(outcome.summary)
    return row


def sweep(
    rates: Sequence[float],
    config: ScenarioConfig,
    out_dir=None,
    jobs=1,
    settings: Sequence[str] = (CLOSED, OPEN),
) -> pd.DataFrame:
    """
    Runs every (rate, setting) cell. A failed cell is reported in its row and
    the sweep goes on.

    :param rates: flexibility rates
    :param config: base configuration
    :param out_dir: [Optional] directory receiving sweep.csv, figures and one directory per cell
    :param jobs: number of worker processes
    :param settings: market settings to compare
    :return: one row per cell, ordered by rate then setting
    """
    cells = [(rate, setting) for rate in sorted(rates) for setting in sorted(settings)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            futures = [executor.submit(_sweep_cell, config, rate, setting, out_dir) for rate, setting in cells]
            rows = [future.result() for future in futures]
    else:
        rows = [_sweep_cell(config, rate, setting, out_dir) for rate, setting in cells]
    frame = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    if out_dir is not None:
        write_sweep(frame, out_dir, sweep_trends(frame))
    return frame


def sweep_trends(frame: pd.DataFrame) -> pd.DataFrame:
    """
    Rank correlation (Spearman) between the flexibility rate and the
    non-contracted reserve volume, per market setting. Failed cells are left
    out. A flat series has no trend (0), fewer than two cells give NaN.

    :param frame: a sweep table
    :return: one row per setting
    """
    rows = []
    for setting, group in frame.groupby("setting", sort=True):
        volumes = group.dropna(subset=["non_contracted_mwh"]).sort_values("rate")
        if len(volumes) < 2:
            trend = math.nan
        elif volumes["non_contracted_mwh"].nunique() == 1:
            trend = 0.0
        else:
            trend = float(spearmanr(volumes["rate"], volumes["non_contracted_mwh"]).correlation)
        dev_logger.info("Setting %s: non-contracted volume trend %.3f over %d cells", setting, trend, len(volumes))
        rows.append({"setting": setting, "cells": len(volumes), "non_contracted_trend": trend})
    return pd.DataFrame(rows, columns=TREND_COLUMNS)


def verify(loads=20, samples=1000, seed=0, periods=8) -> List[CoverageReport]:
    """
    Checks the modulation scenarios of random loads against random activations

    :param loads: number of random loads
    :param samples: random activations per load
    :param seed: seed of the loads and activations
    :param periods: horizon of each trial, covered by one modulation bid
    """
    rng = np.random.default_rng(seed)
    reports = [coverage_trial(rng, periods, samples, seed + number) for number in range(loads)]
    failures = sum(report.failures for report in reports)
    if failures:
        dev_logger.warning("%d infeasible activations over %d loads", failures, loads)
    return reports


def replay(manifest, out_dir=None) -> SimulationOutcome:
    """
    Runs again the configuration of a manifest

    :raises ConfigurationError: when the manifest is invalid
    """
    config, recorded = read_manifest(manifest)
    outcome = run(config, out_dir)
    if recorded.get("termination") not in (None, outcome.termination):
        dev_logger.warning(
            "Replay of %s ended by %s, the manifest recorded %s", manifest, outcome.termination, recorded["termination"]
        )
    return outcome


def main(
    command,
    config_file=None,
    out_dir=None,
    seed=None,
    rate=None,
    setting=None,
    max_rounds=None,
    rates=None,
    jobs=1,
    samples=1000,
    loads=20,
    manifest=None,
    verbose=None,
    logger_file=None,
):
    """
    Main module of flexmarket

    :param command: one of run, sweep, verify, replay
    :param config_file: [Optional] configuration keys overriding the packaged defaults
    :param out_dir: [Optional] output directory
    :param seed: [Optional] overrides the configured seed
    :param rate: [Optional] overrides the configured flexibility rate
    :param setting: [Optional] overrides the configured market setting (closed, open)
    :param max_rounds: [Optional] overrides the configured round limit
    :param rates: [Optional] flexibility rates of a sweep
    :param jobs: worker processes of a sweep
    :param samples: random activations per load (verify)
    :param loads: number of random loads (verify)
    :param manifest: manifest to replay
    :param verbose: [Optional, default = None] Verbosity value, from 1 to 3
    :type verbose: Integer
    :param logger_file: [Optional] Redirect information from standard output to a file
    :return: the outcome, the sweep table or the coverage reports
    """
    build_logger(verbosity_to_level(verbose), logger_file)
    if command not in COMMANDS:
        raise ConfigurationError("Unknown command: {}".format(command))
    if command == VERIFY:
        return verify(loads, samples, 0 if seed is None else seed)
    if command == REPLAY:
        if manifest is None:
            raise ConfigurationError("replay needs a manifest")
        return replay(manifest, out_dir)

    config = load_config(config_file)
    overrides = {
        key: value
        for key, value in (("seed", seed), ("flexibility_rate", rate), ("setting", setting), ("max_rounds", max_rounds))
        if value is not None
    }
    config = config.with_values(**overrides)
    if command == RUN:
        return run(config, out_dir)
    return sweep(rates if rates is not None else DEFAULT_RATES, config, out_dir, jobs)
