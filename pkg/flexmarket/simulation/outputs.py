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
Files written by a simulation: metric tables, the run manifest, per-round
detail tables and SVG figures.

Layout of an output directory::

    metrics.csv            one row of indicators per round
    manifest.txt           configuration and outcome, enough to replay the run
    rounds/<n>/*.csv       offers, clearing, reserve and settlement of round n
    figures/*.svg          line charts

:organization: CS GROUP - France
:copyright: 2021 CS GROUP - France. All rights reserved.
:license: see LICENSE file.
"""

import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from flexmarket.markets.energy_market import write_clearing, write_offers  # noqa: E402
from flexmarket.markets.imbalance import write_settlement  # noqa: E402
from flexmarket.markets.reserve_market import write_procurement  # noqa: E402
from flexmarket.simulation.config import ScenarioConfig  # noqa: E402
from flexmarket.simulation.simulator import METRIC_NAMES, RoundRecord, SimulationOutcome  # noqa: E402

LOGGER = logging.getLogger("dev_logger")

FLOAT_FORMAT = "%.17g"
OUTCOME_PREFIX = "outcome."
METRICS_FILE = "metrics.csv"
MANIFEST_FILE = "manifest.txt"
SWEEP_FILE = "sweep.csv"

SWEEP_COLUMNS = ["rate", "setting", "termination", "rounds", "cycle_start", "cycle_length", "error"] + METRIC_NAMES

TREND_FILE = "sweep_trend.csv"

TREND_COLUMNS = ["setting", "cells", "non_contracted_trend"]

POSITION_COLUMNS = [
    "actor",
    "stage",
    "period",
    "energy_mw",
    "imbalance_plus_mw",
    "imbalance_minus_mw",
    "reserve_up_mw",
    "reserve_down_mw",
]

SWEEP_FIGURES = {
    "price_variability": "Variability of the energy price (EUR/MWh)",
    "total_imbalance_mwh": "Mean total imbalance (MWh)",
    "procurement_cost": "Reserve procurement cost (EUR)",
    "non_contracted_mwh": "Non-contracted reserve (MWh)",
}

plt.rcParams["svg.hashsalt"] = "flexmarket"


def metrics_frame(history: Sequence[RoundRecord]) -> pd.DataFrame:
    frame = pd.DataFrame([record.metrics for record in history], columns=METRIC_NAMES)
    frame.insert(0, "round", [record.index for record in history])
    return frame


def write_metrics(history: Sequence[RoundRecord], path):
    metrics_frame(history).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def read_metrics(path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def write_manifest(config: ScenarioConfig, outcome: SimulationOutcome, path):
    """Configuration keys followed by ``outcome.*`` keys"""
    lines = [config.to_text()]
    values = {
        "termination": outcome.termination,
        "rounds": outcome.rounds,
        "cycle_start": "" if outcome.cycle_start is None else outcome.cycle_start,
        "cycle_length": "" if outcome.cycle_length is None else outcome.cycle_length,
    }
    values.update({name: repr(value) for name, value in outcome.summary.items()})
    lines.extend("{}{} = {}\n".format(OUTCOME_PREFIX, key, value) for key, value in values.items())
    Path(path).write_text("".join(lines))


def read_manifest(path) -> Tuple[ScenarioConfig, Dict[str, str]]:
    """
    :return: the configuration of a run and its outcome keys (prefix removed)
    :raises ConfigurationError: when the configuration part is invalid
    """
    config_lines = []
    outcome = {}
    for line in Path(path).read_text().splitlines():
        if line.startswith(OUTCOME_PREFIX):
            key, _, value = line[len(OUTCOME_PREFIX):].partition("=")
            outcome[key.strip()] = value.strip()
        else:
            config_lines.append(line)
    return ScenarioConfig.from_text("\n".join(config_lines)), outcome


def positions_frame(record: RoundRecord) -> pd.DataFrame:
    rows = []
    for stage, positions in (("day_ahead", record.day_ahead), ("final", record.positions)):
        for actor in sorted(positions):
            position = positions[actor]
            for t in range(position.periods):
                rows.append(
                    [
                        actor,
                        stage,
                        t + 1,
                        position.energy[t],
                        position.imbalance_plus[t],
                        position.imbalance_minus[t],
                        position.reserve_up[t],
                        position.reserve_down[t],
                    ]
                )
    return pd.DataFrame(rows, columns=POSITION_COLUMNS)


def write_round(record: RoundRecord, directory):
    """Detail tables of one round in ``directory``"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_offers(record.clearing.offers, directory / "energy_offers.csv")
    write_clearing(record.clearing, directory / "energy_clearing.csv")
    write_procurement(record.procurement, directory)
    write_settlement(record.settlement, directory / "settlement.csv")
    positions_frame(record).to_csv(directory / "positions.csv", index=False, float_format=FLOAT_FORMAT)


def _save(figure, path):
    figure.savefig(path, format="svg", metadata={"Date": None})
    plt.close(figure)


def _line_chart(x, series: Dict[str, np.ndarray], xlabel, ylabel, path):
    figure, axis = plt.subplots(figsize=(7, 4))
    for label, values in series.items():
        axis.plot(x, values, marker=".", label=label)
    axis.set_xlabel(xlabel)
    axis.set_ylabel(ylabel)
    axis.grid(True)
    if len(series) > 1:
        axis.legend()
    figure.tight_layout()
    _save(figure, path)


def plot_run(history: Sequence[RoundRecord], directory):
    """Mean price, forecast error and imbalance along the rounds"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    frame = metrics_frame(history)
    rounds = frame["round"].to_numpy()
    _line_chart(rounds, {"mean MCP": frame["mean_mcp"].to_numpy()}, "round", "EUR/MWh", directory / "mcp.svg")
    _line_chart(
        rounds,
        {"forecast error": frame["forecast_error"].to_numpy()},
        "round",
        "EUR/MWh",
        directory / "forecast_error.svg",
    )
    _line_chart(
        rounds,
        {
            "total imbalance": frame["total_imbalance_mwh"].to_numpy(),
            "non-contracted": frame["non_contracted_mwh"].to_numpy(),
        },
        "round",
        "MWh",
        directory / "imbalance.svg",
    )


def write_run(config: ScenarioConfig, outcome: SimulationOutcome, out_dir):
    """Writes every output of a run in ``out_dir``"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_metrics(outcome.history, out_dir / METRICS_FILE)
    write_manifest(config, outcome, out_dir / MANIFEST_FILE)
    if config.write_rounds:
        for record in outcome.history:
            write_round(record, out_dir / "rounds" / str(record.index))
    plot_run(outcome.history, out_dir / "figures")
    LOGGER.info("Run outputs written in %s", out_dir)


def write_sweep(frame: pd.DataFrame, out_dir, trends: Optional[pd.DataFrame] = None):
    """Sweep table, per-setting trends when given, and one chart per indicator, a line per market setting"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out_dir / SWEEP_FILE, index=False, float_format=FLOAT_FORMAT)
    if trends is not None:
        trends.to_csv(out_dir / TREND_FILE, index=False, float_format=FLOAT_FORMAT)
    figures = out_dir / "figures"
    figures.mkdir(exist_ok=True)
    for name, title in SWEEP_FIGURES.items():
        figure, axis = plt.subplots(figsize=(7, 4))
        for setting, cells in frame.groupby("setting", sort=True):
            cells = cells.sort_values("rate")
            axis.plot(100 * cells["rate"], cells[name], marker="o", label=setting)
        axis.set_xlabel("flexibility rate (%)")
        axis.set_title(title)
        axis.grid(True)
        axis.legend()
        figure.tight_layout()
        _save(figure, figures / "{}.svg".format(name))


def read_sweep(path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip", keep_default_na=False, na_values=[""])
