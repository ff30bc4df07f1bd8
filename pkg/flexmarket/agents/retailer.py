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
Retailer models: day-ahead consumption planning, repositioning once the energy
market is cleared, and the planning of modulation bids for the reserve market.

The retailer minimizes its energy and imbalance costs. A demand above the
learned D^max_t is charged at the cap and imbalances above their learned
thresholds at pi^nc; these penalties are written with excess variables.

:organization: CS GROUP - France
:copyright: 2021 CS GROUP - France. All rights reserved.
:license: see LICENSE file.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from flexmarket.agents.portfolios import (
    RETAILER,
    VOLUME_TOLERANCE,
    ActorPosition,
    AgentSettings,
    PriceForecast,
    RetailerPortfolio,
)
from flexmarket.exceptions import ConfigurationError
from flexmarket.markets.energy_market import DEMAND, EnergyOffer
from flexmarket.markets.reserve_market import ModulationBid
from flexmarket.optim.lp_core import EQ, GE, INF, LE, LinearProgram, solve

LOGGER = logging.getLogger("dev_logger")

Window = Tuple[int, int]


def bid_grid(periods, length) -> List[Window]:
    """
    Contiguous modulation windows (start, length) covering the horizon; a tail
    shorter than ``length`` gets no bid

    :param periods: number of periods T
    :param length: N, even
    """
    if length < 2 or length % 2:
        raise ConfigurationError("Modulation bids need an even length >= 2, got {}".format(length))
    return [(start, length) for start in range(1, periods - length + 2, length)]


class _RetailerModel:
    """LP of a retailer, energy-only when ``windows`` is None"""

    def __init__(
        self,
        portfolio: RetailerPortfolio,
        forecast: PriceForecast,
        settings: AgentSettings,
        stage,
        demand=None,
        windows: Optional[Sequence[Window]] = None,
        amplitudes=None,
    ):
        self.portfolio = portfolio
        self.settings = settings
        self.stage = stage
        self.windows = list(windows) if windows is not None else None
        periods = portfolio.periods
        hours = portfolio.period_hours
        thresholds = portfolio.thresholds
        lp = LinearProgram("{}_{}".format(portfolio.name, stage), "min")
        self.lp = lp

        if demand is None:
            limit = settings.imbalance_limit_ratio * portfolio.capacity()
        else:
            demand = np.asarray(demand, dtype=float)
            limit = np.full(periods, INF)
        self.demand, self.plus, self.minus = [], [], []
        for t in range(periods):
            low, high = (0.0, INF) if demand is None else (demand[t], demand[t])
            d_var = lp.add_variable("D_{}".format(t + 1), low, high, forecast.energy[t] * hours)
            plus = lp.add_variable("Ip_{}".format(t + 1), 0.0, limit[t], forecast.imbalance_plus[t] * hours)
            minus = lp.add_variable("Im_{}".format(t + 1), 0.0, limit[t], forecast.imbalance_minus[t] * hours)
            self.demand.append(d_var)
            self.plus.append(plus)
            self.minus.append(minus)
            if math.isfinite(thresholds.market[t]):
                excess = lp.add_variable(
                    "zD_{}".format(t + 1), cost=max(settings.price_cap - forecast.energy[t], 0.0) * hours
                )
                row = {excess: 1.0, d_var: -1.0}
                if self.windows is not None:
                    row[minus] = -1.0
                lp.add_constraint(row, GE, -thresholds.market[t], "cap_{}".format(t + 1))
            self._threshold_penalty(
                plus, thresholds.imbalance_plus[t], forecast.imbalance_plus[t], "Ip", t
            )
            self._threshold_penalty(
                minus, thresholds.imbalance_minus[t], forecast.imbalance_minus[t], "Im", t
            )

        self.power, self.energy = [], []
        for load in portfolio.loads:
            power = [
                lp.add_variable("d_{}_{}".format(load.name, t + 1), load.power_min[t], load.power_max[t])
                for t in range(periods)
            ]
            energy = [
                lp.add_variable("e_{}_{}".format(load.name, t + 2), *load.energy_bounds_after(t))
                for t in range(periods)
            ]
            for t in range(periods):
                row = {energy[t]: 1.0, power[t]: -load.efficiency * hours}
                rhs = -load.losses[t]
                if t == 0:
                    rhs += load.initial_energy
                else:
                    row[energy[t - 1]] = -1.0
                lp.add_constraint(row, EQ, rhs, "tank_{}_{}".format(load.name, t + 1))
            consumed = {var: hours for var in power}
            if load.total_min == load.total_max:
                lp.add_constraint(consumed, EQ, load.total_min, "xi_{}".format(load.name))
            else:
                if math.isfinite(load.total_min):
                    lp.add_constraint(consumed, GE, load.total_min, "xi_min_{}".format(load.name))
                if math.isfinite(load.total_max):
                    lp.add_constraint(consumed, LE, load.total_max, "xi_max_{}".format(load.name))
            self.power.append(power)
            self.energy.append(energy)

        for t in range(periods):
            row = {self.demand[t]: 1.0, self.plus[t]: -1.0, self.minus[t]: 1.0}
            for power in self.power:
                row[power[t]] = -1.0
            lp.add_constraint(row, EQ, portfolio.inelastic[t], "balance_{}".format(t + 1))

        self.amplitude = []
        self.scenario_power = []
        if self.windows is not None:
            for k, window in enumerate(self.windows):
                fixed = None if amplitudes is None else amplitudes[k]
                self._add_modulation(k, window, fixed)

    def _threshold_penalty(self, var, threshold, forecast_price, label, t):
        if not math.isfinite(threshold):
            return
        hours = self.portfolio.period_hours
        excess = self.lp.add_variable(
            "z{}_{}".format(label, t + 1),
            cost=max(self.settings.non_contracted_price - forecast_price, 0.0) * hours,
        )
        self.lp.add_constraint({excess: 1.0, var: -1.0}, GE, -threshold, "{}_max_{}".format(label, t + 1))

    def _add_modulation(self, k, window: Window, fixed):
        lp = self.lp
        settings = self.settings
        hours = self.portfolio.period_hours
        start, length = window
        first = start - 1
        last = first + length - 1
        half = first + length // 2
        revenue = settings.modulation_price * length * hours
        if fixed is None:
            amplitude = lp.add_variable("F_{}".format(k + 1), 0.0, INF, -(revenue + settings.tie_bonus))
        else:
            amplitude = lp.add_variable("F_{}".format(k + 1), fixed, fixed, -(revenue + settings.tie_bonus))
        self.amplitude.append(amplitude)

        scenarios = {}
        for number, load in enumerate(self.portfolio.loads):
            power = self.power[number]
            energy = self.energy[number]
            for label in ("up", "down"):
                scenario = {
                    t: lp.add_variable(
                        "d{}_{}_{}".format(label, load.name, t + 1), load.power_min[t], load.power_max[t]
                    )
                    for t in range(first, last + 1)
                }
                stored = {
                    t: lp.add_variable("e{}_{}_{}".format(label, load.name, t + 2), *load.energy_bounds_after(t))
                    for t in range(first, last)
                }
                gain = -load.efficiency * hours
                # the scenario leaves the baseline tank at the start of the bid
                row = {stored[first]: 1.0, scenario[first]: gain}
                rhs = -load.losses[first]
                if first == 0:
                    rhs += load.initial_energy
                else:
                    row[energy[first - 1]] = -1.0
                lp.add_constraint(row, EQ, rhs, "{}_begin_{}_{}".format(label, load.name, k + 1))
                for t in range(first + 1, last):
                    lp.add_constraint(
                        {stored[t]: 1.0, stored[t - 1]: -1.0, scenario[t]: gain},
                        EQ,
                        -load.losses[t],
                        "{}_intra_{}_{}".format(label, load.name, t + 1),
                    )
                # and joins it again at the end
                lp.add_constraint(
                    {energy[last]: 1.0, stored[last - 1]: -1.0, scenario[last]: gain},
                    EQ,
                    -load.losses[last],
                    "{}_end_{}_{}".format(label, load.name, k + 1),
                )
                scenarios[(number, label)] = scenario
        self.scenario_power.append(scenarios)

        loads = range(len(self.portfolio.loads))
        for t in range(first, last + 1):
            above, below = ("up", "down") if t < half else ("down", "up")
            # F <= scenario above the baseline - baseline
            row = {amplitude: 1.0}
            for number in loads:
                row[scenarios[(number, above)][t]] = -1.0
                row[self.power[number][t]] = 1.0
            lp.add_constraint(row, LE, 0.0, "flex_above_{}_{}".format(k + 1, t + 1))
            # F <= baseline - scenario below the baseline
            row = {amplitude: 1.0}
            for number in loads:
                row[scenarios[(number, below)][t]] = 1.0
                row[self.power[number][t]] = -1.0
            lp.add_constraint(row, LE, 0.0, "flex_below_{}_{}".format(k + 1, t + 1))

    def solve(self) -> ActorPosition:
        portfolio = self.portfolio
        solution = solve(self.lp, self.settings.solver_options)
        if not solution.is_optimal:
            raise ConfigurationError(
                "Retailer {}: the {} model is {}".format(portfolio.name, self.stage, solution.status)
            )
        values = solution.values
        periods = portfolio.periods
        schedules = {
            load.name: values[self.power[number]] for number, load in enumerate(portfolio.loads)
        }
        position = ActorPosition(
            portfolio.name,
            RETAILER,
            self.stage,
            values[self.demand],
            values[self.plus],
            values[self.minus],
            np.zeros(periods),
            np.zeros(periods),
            schedules=schedules,
            objective=solution.objective,
        )
        if self.windows is not None:
            for load in portfolio.loads:
                position.scenario_up[load.name] = schedules[load.name].copy()
                position.scenario_down[load.name] = schedules[load.name].copy()
            for k, (start, length) in enumerate(self.windows):
                position.modulation.append(
                    ModulationBid(
                        portfolio.name,
                        start,
                        length,
                        max(float(values[self.amplitude[k]]), 0.0),
                        0.0,
                        self.settings.modulation_efficiency,
                    )
                )
                for (number, label), scenario in self.scenario_power[k].items():
                    target = position.scenario_up if label == "up" else position.scenario_down
                    name = portfolio.loads[number].name
                    for t, var in scenario.items():
                        target[name][t] = values[var]
        LOGGER.debug(
            "Retailer %s %s: demand %.3f MWh, imbalance %.3f MWh",
            portfolio.name,
            self.stage,
            position.energy.sum(),
            (position.imbalance_plus + position.imbalance_minus).sum(),
        )
        return position


def retailer_day_ahead(
    portfolio: RetailerPortfolio, forecast: PriceForecast, settings: Optional[AgentSettings] = None
) -> ActorPosition:
    """
    Plans the consumption of the next day and the demand D_t to buy

    :raises ConfigurationError: when the tank data admit no schedule
    """
    settings = settings or AgentSettings()
    return _RetailerModel(portfolio, forecast, settings, "day_ahead").solve()


def retailer_reposition(
    portfolio: RetailerPortfolio, forecast: PriceForecast, demand, settings: Optional[AgentSettings] = None
) -> ActorPosition:
    """
    Re-optimizes schedules and imbalances once D_t is known

    :param demand: cleared D_t
    :raises ConfigurationError: when the tank data admit no schedule
    """
    settings = settings or AgentSettings()
    return _RetailerModel(portfolio, forecast, settings, "reposition", demand=demand).solve()


def retailer_with_modulation(
    portfolio: RetailerPortfolio,
    forecast: PriceForecast,
    windows: Sequence[Window],
    settings: Optional[AgentSettings] = None,
    demand=None,
    amplitudes=None,
) -> ActorPosition:
    """
    Retailer model with modulation bids: besides the baseline schedule, each bid
    window gets the two extreme scenarios (up then down, down then up) and the
    amplitude F_k both scenarios can deliver.

    Without flexible loads the energy-only model is used and every amplitude is 0.

    :param windows: modulation windows (start, length)
    :param demand: cleared D_t, free when None
    :param amplitudes: contracted F_k per window, free when None
    :raises ConfigurationError: when the tank data admit no schedule
    """
    settings = settings or AgentSettings()
    if demand is None:
        stage = "day_ahead"
    elif amplitudes is None:
        stage = "reserve_bidding"
    else:
        stage = "reposition"
    if not portfolio.loads:
        position = _RetailerModel(portfolio, forecast, settings, stage, demand=demand).solve()
        position.modulation = [
            ModulationBid(portfolio.name, start, length, 0.0, 0.0, settings.modulation_efficiency)
            for start, length in windows
        ]
        return position
    return _RetailerModel(
        portfolio, forecast, settings, stage, demand=demand, windows=windows, amplitudes=amplitudes
    ).solve()


def scenario_demand(portfolio: RetailerPortfolio, position: ActorPosition, label):
    """Aggregated scenario consumption (nu_t plus the scenario of every load)"""
    scenarios = position.scenario_up if label == "up" else position.scenario_down
    total = portfolio.inelastic.copy()
    for load in portfolio.loads:
        total = total + scenarios.get(load.name, position.schedules[load.name])
    return total


def retailer_offers(position: ActorPosition, price_cap) -> List[EnergyOffer]:
    """Demand offers D_t at the price cap"""
    return [
        EnergyOffer(position.actor, t + 1, DEMAND, float(volume), price_cap)
        for t, volume in enumerate(position.energy)
        if volume > VOLUME_TOLERANCE
    ]


def modulation_bids(position: ActorPosition) -> List[ModulationBid]:
    """Modulation bids worth submitting (positive amplitude)"""
    return [bid for bid in position.modulation if bid.amplitude > VOLUME_TOLERANCE]
