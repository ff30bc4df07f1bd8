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
Round-based market simulation.

Every round simulates one day in three stages:

1. actors forecast prices, plan their day and bid on the energy market;
2. producers (and retailers in the open setting) bid on the reserve market,
   whose requirement is a share of the consumption cleared in each period;
3. actors reposition, the system operator settles the resulting imbalance and
   imbalance tariffs are charged.

Actors then learn from the prices of the round. The simulation stops when the
forecasts match the prices, when actors repeat an earlier round, or after a
maximum number of rounds.

:organization: CS GROUP - France
:copyright: 2021 CS GROUP - France. All rights reserved.
:license: see LICENSE file.
"""

import copy
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from flexmarket.agents.forecaster import forecast as forecast_prices
from flexmarket.agents.portfolios import (
    PRICE_TOLERANCE,
    ActorPosition,
    PriceForecast,
    learn_thresholds,
)
from flexmarket.agents.producer import (
    DAY_AHEAD,
    POST_ENERGY,
    POST_RESERVE,
    energy_offers,
    producer_optimize,
    reserve_bids,
)
from flexmarket.agents.retailer import (
    bid_grid,
    modulation_bids,
    retailer_day_ahead,
    retailer_offers,
    retailer_reposition,
    retailer_with_modulation,
)
from flexmarket.exceptions import ConfigurationError, LPSolverError, SimulationError
from flexmarket.markets.energy_market import DEMAND, SUPPLY, ClearingResult, clear
from flexmarket.markets.imbalance import SettlementResult, fees, settle
from flexmarket.markets.reserve_market import DOWN, UP, ReserveProcurement, clear_reserve
from flexmarket.simulation.config import OPEN, ScenarioConfig
from flexmarket.simulation.scenario import Scenario, generate_scenario

LOGGER = logging.getLogger("dev_logger")

CONVERGED = "converged"
CYCLE = "cycle"
MAX_ROUNDS = "max_rounds"

SYSTEM_OPERATOR = "system_operator"
MARKET_OPERATOR = "market_operator"

METRIC_NAMES = [
    "mean_mcp",
    "price_variability",
    "total_imbalance_mwh",
    "non_contracted_mwh",
    "procurement_cost",
    "settlement_cost",
    "clearing_objective",
    "retailer_imbalance_mwh",
    "producer_imbalance_mwh",
    "forecast_error",
    "traded_mwh",
]


@dataclass
class RoundRecord:
    """Everything a round produced; ``positions`` are the final (stage 3) ones"""

    index: int
    forecast: PriceForecast
    prices: np.ndarray
    tariff_plus: np.ndarray
    tariff_minus: np.ndarray
    day_ahead: Dict[str, ActorPosition]
    positions: Dict[str, ActorPosition]
    clearing: ClearingResult
    procurement: ReserveProcurement
    settlement: SettlementResult
    fees: Dict[str, float]
    metrics: Dict[str, float] = field(default_factory=dict)

    def state_vector(self):
        """Prices, tariffs and the positions of every actor, ordered by actor id"""
        parts = [self.prices, self.tariff_plus, self.tariff_minus]
        for actor in sorted(self.positions):
            parts.append(self.day_ahead[actor].state_vector())
            parts.append(self.positions[actor].state_vector())
        return np.concatenate(parts)


@dataclass
class SimulationOutcome:
    termination: str
    cycle_start: Optional[int]
    cycle_length: Optional[int]
    summary: Dict[str, float]
    history: List[RoundRecord]

    @property
    def rounds(self):
        return len(self.history)

    def summary_rounds(self, tail_rounds=24) -> List[RoundRecord]:
        """Rounds averaged in the summary: the last one, the cycle, or the last tail_rounds"""
        if self.termination == CYCLE:
            return self.history[self.cycle_start - 1:self.cycle_start - 1 + self.cycle_length]
        if self.termination == CONVERGED:
            return self.history[-1:]
        return self.history[-tail_rounds:]


def _state(item):
    if hasattr(item, "state_vector"):
        return item.state_vector()
    return np.asarray(item, dtype=float)


def _same_state(first, second, tolerance):
    return first.shape == second.shape and bool(np.all(np.abs(first - second) <= tolerance))


def detect_cycle(history: Sequence, tolerance=1e-6) -> Optional[Tuple[int, int]]:
    """
    Earliest repetition in a history of rounds

    :param history: round records or state vectors
    :param tolerance: componentwise tolerance of the state comparison
    :return: (start, length) with rounds numbered from 1, None without repetition
    """
    states = [_state(item) for item in history]
    for start in range(len(states)):
        for later in range(start + 1, len(states)):
            if _same_state(states[start], states[later], tolerance):
                return start + 1, later - start
    return None


def round_metrics(record: RoundRecord, scenario: Scenario, period_hours=1.0) -> Dict[str, float]:
    """Indicators of one round; imbalance volumes of actors are the planned day-ahead ones"""
    settlement = record.settlement
    activated = settlement.activated_up() + settlement.activated_down()
    non_contracted = settlement.non_contracted_up + settlement.non_contracted_down
    retailers = {portfolio.name for portfolio in scenario.retailers}

    def planned(names):
        return float(
            sum(
                (record.day_ahead[name].imbalance_plus + record.day_ahead[name].imbalance_minus).sum()
                for name in names
            )
            * period_hours
        )

    return {
        "mean_mcp": float(record.prices.mean()),
        "price_variability": float(record.prices.max() - record.prices.min()),
        "total_imbalance_mwh": float((np.abs(activated) + non_contracted).sum() * period_hours),
        "non_contracted_mwh": float(non_contracted.sum() * period_hours),
        "procurement_cost": float(record.procurement.procurement_cost),
        "settlement_cost": float(settlement.cost),
        "clearing_objective": float(record.procurement.objective),
        "retailer_imbalance_mwh": planned(sorted(retailers)),
        "producer_imbalance_mwh": planned(sorted(set(record.day_ahead) - retailers)),
        "forecast_error": float(np.abs(record.forecast.energy - record.prices).max()),
        "traded_mwh": float(record.clearing.traded.sum() * period_hours),
    }


def metrics(records: Sequence[RoundRecord]) -> Dict[str, float]:
    """Mean of every round indicator over some rounds"""
    if not records:
        raise ValueError("No round to summarize")
    frame = pd.DataFrame([record.metrics for record in records], columns=METRIC_NAMES)
    return {name: float(value) for name, value in frame.mean().items()}


class MarketSimulator:
    """
    Plays rounds over a scenario. The scenario is copied: learned thresholds
    evolve on the copy only.
    """

    def __init__(self, config: ScenarioConfig, scenario: Optional[Scenario] = None):
        self.config = config
        self.scenario = copy.deepcopy(scenario) if scenario is not None else generate_scenario(config)
        self.periods = self.scenario.periods
        self.hours = config.period_hours
        self.settings = config.agent_settings()
        self.forecast_settings = config.forecast_settings()
        self.reserve_prices = config.reserve_prices()
        self.open_market = config.setting == OPEN
        self.windows = bid_grid(self.periods, config.modulation_length) if self.open_market else []
        self.history: List[RoundRecord] = []

    def _guard(self, index, stage, actor, function, *args, **kwargs):
        try:
            return function(*args, **kwargs)
        except (ConfigurationError, LPSolverError, ValueError) as error:
            raise SimulationError(index, stage, actor, error) from error

    def _forecast(self) -> PriceForecast:
        return forecast_prices(
            [record.prices for record in self.history],
            [record.tariff_plus for record in self.history],
            [record.tariff_minus for record in self.history],
            self.periods,
            self.forecast_settings,
        )

    def play_round(self) -> RoundRecord:
        """Plays the next round and appends it to the history"""
        index = len(self.history) + 1
        config = self.config
        settings = self.settings
        forecast = self._forecast()

        # energy market
        day_ahead = {}
        offers = []
        for retailer in self.scenario.retailers:
            if self.open_market:
                position = self._guard(
                    index, "energy bidding", retailer.name,
                    retailer_with_modulation, retailer, forecast, self.windows, settings,
                )
            else:
                position = self._guard(
                    index, "energy bidding", retailer.name, retailer_day_ahead, retailer, forecast, settings
                )
            day_ahead[retailer.name] = position
            offers.extend(retailer_offers(position, config.price_cap))
        for producer in self.scenario.producers:
            position = self._guard(
                index, "energy bidding", producer.name,
                producer_optimize, producer, forecast, DAY_AHEAD, settings=settings,
            )
            day_ahead[producer.name] = position
            offers.extend(energy_offers(position, producer, forecast, config.price_cap))
        clearing = self._guard(index, "energy clearing", MARKET_OPERATOR, clear, offers, self.periods, config.price_cap)
        requirement = config.reserve_ratio * clearing.side_volume(DEMAND)

        # reserve market
        classical = []
        modulation = []
        for producer in self.scenario.producers:
            position = self._guard(
                index, "reserve bidding", producer.name,
                producer_optimize, producer, forecast, POST_ENERGY,
                energy=clearing.cleared_volume(producer.name, SUPPLY), settings=settings,
            )
            classical.extend(reserve_bids(position, producer))
        if self.open_market:
            for retailer in self.scenario.retailers:
                position = self._guard(
                    index, "reserve bidding", retailer.name,
                    retailer_with_modulation, retailer, forecast, self.windows, settings,
                    demand=clearing.cleared_volume(retailer.name, DEMAND),
                )
                modulation.extend(modulation_bids(position))
        procurement = self._guard(
            index, "reserve clearing", SYSTEM_OPERATOR,
            clear_reserve, classical, modulation, requirement, requirement, self.reserve_prices,
            settings.solver_options,
        )

        # repositioning and settlement
        positions = {}
        for retailer in self.scenario.retailers:
            demand = clearing.cleared_volume(retailer.name, DEMAND)
            if self.open_market:
                contracted = procurement.contracted_amplitudes(retailer.name)
                amplitudes = [contracted.get(start, 0.0) for start, _ in self.windows]
                positions[retailer.name] = self._guard(
                    index, "repositioning", retailer.name,
                    retailer_with_modulation, retailer, forecast, self.windows, settings,
                    demand=demand, amplitudes=amplitudes,
                )
            else:
                positions[retailer.name] = self._guard(
                    index, "repositioning", retailer.name, retailer_reposition, retailer, forecast, demand, settings
                )
        for producer in self.scenario.producers:
            positions[producer.name] = self._guard(
                index, "repositioning", producer.name,
                producer_optimize, producer, forecast, POST_RESERVE,
                energy=clearing.cleared_volume(producer.name, SUPPLY),
                unit_up={
                    unit.name: procurement.accepted_volume(producer.name, UP, unit.name) for unit in producer.units
                },
                unit_down={
                    unit.name: procurement.accepted_volume(producer.name, DOWN, unit.name) for unit in producer.units
                },
                settings=settings,
            )
        imbalance = sum((position.net_imbalance for position in positions.values()), np.zeros(self.periods))
        settlement = self._guard(
            index, "settlement", SYSTEM_OPERATOR,
            settle, imbalance, procurement, config.non_contracted_price, settings.solver_options,
        )
        settlement.fees = fees(
            settlement.tariff_plus,
            settlement.tariff_minus,
            {
                actor: (position.imbalance_plus, position.imbalance_minus)
                for actor, position in sorted(positions.items())
            },
            self.hours,
        )

        # learning
        for portfolio in list(self.scenario.retailers) + list(self.scenario.producers):
            position = positions[portfolio.name]
            portfolio.thresholds = learn_thresholds(
                portfolio.thresholds,
                day_ahead[portfolio.name].energy,
                position.imbalance_plus,
                position.imbalance_minus,
                clearing.prices,
                settlement.tariff_plus,
                settlement.tariff_minus,
                config.price_cap,
                config.non_contracted_price,
                config.threshold_factor,
                config.threshold_memory,
            )

        record = RoundRecord(
            index,
            forecast,
            clearing.prices.copy(),
            settlement.tariff_plus.copy(),
            settlement.tariff_minus.copy(),
            day_ahead,
            positions,
            clearing,
            procurement,
            settlement,
            settlement.fees,
        )
        record.metrics = round_metrics(record, self.scenario, self.hours)
        self.history.append(record)
        LOGGER.info(
            "Round %d: mean MCP %.3f, imbalance %.3f MWh, procurement %.2f",
            index,
            record.metrics["mean_mcp"],
            record.metrics["total_imbalance_mwh"],
            record.metrics["procurement_cost"],
        )
        return record

    def converged(self, record: RoundRecord) -> bool:
        """
        True when the forecasts of the round matched its prices. Tariffs equal to
        0 or pi^nc are ignored, forecasts never aim at them.
        """
        if record.index < 2:
            return False
        tolerance = self.config.convergence_tolerance
        if np.abs(record.forecast.energy - record.prices).max() > tolerance:
            return False
        nc = self.config.non_contracted_price
        for forecast, realized in (
            (record.forecast.imbalance_plus, record.tariff_plus),
            (record.forecast.imbalance_minus, record.tariff_minus),
        ):
            relevant = (realized > PRICE_TOLERANCE) & (realized < nc - PRICE_TOLERANCE)
            if relevant.any() and np.abs(forecast - realized)[relevant].max() > tolerance:
                return False
        return True

    def _repeated(self, record: RoundRecord) -> Optional[int]:
        state = record.state_vector()
        for earlier in self.history[:-1]:
            if _same_state(earlier.state_vector(), state, self.config.state_tolerance):
                return earlier.index
        return None

    def run(self) -> SimulationOutcome:
        """Plays rounds until convergence, a cycle or the round limit"""
        termination, start, length = MAX_ROUNDS, None, None
        while len(self.history) < self.config.max_rounds:
            record = self.play_round()
            if self.converged(record):
                termination = CONVERGED
                break
            earlier = self._repeated(record)
            if earlier is not None:
                termination, start, length = CYCLE, earlier, record.index - earlier
                break
        outcome = SimulationOutcome(termination, start, length, {}, self.history)
        outcome.summary = metrics(outcome.summary_rounds(self.config.tail_rounds))
        LOGGER.info("Simulation ended by %s after %d rounds", termination, len(self.history))
        return outcome


def run(config: ScenarioConfig, scenario: Optional[Scenario] = None) -> SimulationOutcome:
    """Simulates a configuration until it converges, cycles or reaches max_rounds"""
    return MarketSimulator(config, scenario).run()
