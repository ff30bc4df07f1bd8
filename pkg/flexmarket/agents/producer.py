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
Producer model and the offers a producer derives from its positions.

:organization: CS GROUP - France
:copyright: 2021 CS GROUP - France. All rights reserved.
:license: see LICENSE file.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from flexmarket.agents.portfolios import (
    PRODUCER,
    VOLUME_TOLERANCE,
    ActorPosition,
    AgentSettings,
    PriceForecast,
    ProducerPortfolio,
)
from flexmarket.exceptions import ConfigurationError
from flexmarket.markets.energy_market import SUPPLY, EnergyOffer
from flexmarket.markets.reserve_market import DOWN, UP, ClassicalReserveBid
from flexmarket.optim.lp_core import EQ, GE, INF, LE, LinearProgram, solve

LOGGER = logging.getLogger("dev_logger")

DAY_AHEAD = "day_ahead"
POST_ENERGY = "post_energy"
POST_RESERVE = "post_reserve"
STAGES = (DAY_AHEAD, POST_ENERGY, POST_RESERVE)

IMBALANCE_UNIT = "imbalance"


@dataclass
class ProducerOffers:
    energy: List[EnergyOffer]
    reserve: List[ClassicalReserveBid]


def producer_optimize(
    portfolio: ProducerPortfolio,
    forecast: PriceForecast,
    stage=DAY_AHEAD,
    energy=None,
    unit_up: Optional[Dict[str, np.ndarray]] = None,
    unit_down: Optional[Dict[str, np.ndarray]] = None,
    settings: Optional[AgentSettings] = None,
) -> ActorPosition:
    """
    Maximizes the expected profit of a producer: energy sales, reserve
    valuation and imbalance costs minus production costs.

    The stage decides what is data: P_t after energy clearing, and the reserve
    u_{i,t}, l_{i,t} of every unit after reserve clearing.

    :param stage: one of day_ahead, post_energy, post_reserve
    :param energy: cleared P_t, needed after day_ahead
    :param unit_up: accepted upward reserve per unit name, needed at post_reserve
    :param unit_down: accepted downward reserve per unit name, needed at post_reserve
    :raises ConfigurationError: on a missing input or infeasible unit data
    """
    if stage not in STAGES:
        raise ConfigurationError("Unknown producer stage: {}".format(stage))
    if stage != DAY_AHEAD and energy is None:
        raise ConfigurationError("Producer {}: stage {} needs the cleared energy".format(portfolio.name, stage))
    if stage == POST_RESERVE and (unit_up is None or unit_down is None):
        raise ConfigurationError("Producer {}: stage {} needs the accepted reserve".format(portfolio.name, stage))
    settings = settings or AgentSettings()
    periods = portfolio.periods
    hours = portfolio.period_hours
    thresholds = portfolio.thresholds
    lp = LinearProgram("{}_{}".format(portfolio.name, stage), "max")

    if stage == DAY_AHEAD:
        limit = settings.imbalance_limit_ratio * portfolio.capacity()
    else:
        energy = np.asarray(energy, dtype=float)
        limit = np.full(periods, INF)

    output: Dict[str, List[int]] = {}
    up: Dict[str, List[int]] = {}
    down: Dict[str, List[int]] = {}
    for unit in portfolio.units:
        output[unit.name] = []
        up[unit.name] = []
        down[unit.name] = []
        for t in range(periods):
            p_var = lp.add_variable(
                "p_{}_{}".format(unit.name, t + 1), unit.output_min[t], unit.output_max[t], -unit.cost[t] * hours
            )
            if stage == POST_RESERVE:
                bounds = (unit_up[unit.name][t],) * 2, (unit_down[unit.name][t],) * 2
            else:
                bounds = (0.0, INF), (0.0, INF)
            u_var = lp.add_variable("u_{}_{}".format(unit.name, t + 1), *bounds[0], portfolio.reserve_valuation * hours)
            l_var = lp.add_variable("l_{}_{}".format(unit.name, t + 1), *bounds[1], portfolio.reserve_valuation * hours)
            lp.add_constraint({p_var: 1.0, u_var: 1.0}, LE, unit.output_max[t], "head_{}_{}".format(unit.name, t + 1))
            lp.add_constraint({p_var: 1.0, l_var: -1.0}, GE, unit.output_min[t], "foot_{}_{}".format(unit.name, t + 1))
            output[unit.name].append(p_var)
            up[unit.name].append(u_var)
            down[unit.name].append(l_var)
        _ramp_constraints(lp, unit, output[unit.name], up[unit.name], down[unit.name])

    market, plus, minus = [], [], []
    for t in range(periods):
        low, high = (0.0, INF) if stage == DAY_AHEAD else (energy[t], energy[t])
        p_total = lp.add_variable("P_{}".format(t + 1), low, high, forecast.energy[t] * hours)
        i_plus = lp.add_variable("Ip_{}".format(t + 1), 0.0, limit[t], -forecast.imbalance_plus[t] * hours)
        i_minus = lp.add_variable("Im_{}".format(t + 1), 0.0, limit[t], -forecast.imbalance_minus[t] * hours)
        row = {p_total: 1.0, i_plus: 1.0, i_minus: -1.0}
        for unit in portfolio.units:
            row[output[unit.name][t]] = -1.0
        lp.add_constraint(row, EQ, 0.0, "balance_{}".format(t + 1))
        if thresholds.market[t] > 0:
            # offering less than P^min is charged as if bought back at the cap
            shortfall = lp.add_variable(
                "zP_{}".format(t + 1), cost=-(settings.price_cap + forecast.energy[t]) * hours
            )
            lp.add_constraint({shortfall: 1.0, p_total: 1.0}, GE, thresholds.market[t], "Pmin_{}".format(t + 1))
        for var, threshold, price, label in (
            (i_plus, thresholds.imbalance_plus[t], forecast.imbalance_plus[t], "Ip"),
            (i_minus, thresholds.imbalance_minus[t], forecast.imbalance_minus[t], "Im"),
        ):
            if math.isfinite(threshold):
                excess = lp.add_variable(
                    "z{}_{}".format(label, t + 1),
                    cost=-max(settings.non_contracted_price - price, 0.0) * hours,
                )
                lp.add_constraint({excess: 1.0, var: -1.0}, GE, -threshold, "{}_max_{}".format(label, t + 1))
        market.append(p_total)
        plus.append(i_plus)
        minus.append(i_minus)

    solution = solve(lp, settings.solver_options)
    if not solution.is_optimal:
        raise ConfigurationError(
            "Producer {}: the {} model is {}".format(portfolio.name, stage, solution.status)
        )
    values = solution.values
    schedules = {name: values[indices] for name, indices in output.items()}
    reserve_up = {name: values[indices] for name, indices in up.items()}
    reserve_down = {name: values[indices] for name, indices in down.items()}
    position = ActorPosition(
        portfolio.name,
        PRODUCER,
        stage,
        values[market],
        values[plus],
        values[minus],
        sum(reserve_up.values(), np.zeros(periods)),
        sum(reserve_down.values(), np.zeros(periods)),
        schedules=schedules,
        unit_up=reserve_up,
        unit_down=reserve_down,
        objective=solution.objective,
    )
    LOGGER.debug(
        "Producer %s %s: sells %.3f MWh, reserve %.3f up %.3f down",
        portfolio.name,
        stage,
        position.energy.sum(),
        position.reserve_up.sum(),
        position.reserve_down.sum(),
    )
    return position


def _ramp_constraints(lp, unit, output, up, down):
    """Ramps bound the move from p_{t-1} to the reserve edges p_t + u_t and p_t - l_t"""
    if unit.ramp_up >= unit.output_max.max() and unit.ramp_down >= unit.output_max.max():
        return
    for t in range(len(output)):
        rise = {output[t]: 1.0, up[t]: 1.0}
        fall = {output[t]: -1.0, down[t]: 1.0}
        if t == 0:
            if unit.initial_output is None:
                continue
            lp.add_constraint(rise, LE, unit.ramp_up + unit.initial_output, "ramp_up_{}_1".format(unit.name))
            lp.add_constraint(fall, LE, unit.ramp_down - unit.initial_output, "ramp_down_{}_1".format(unit.name))
            continue
        rise[output[t - 1]] = -1.0
        fall[output[t - 1]] = 1.0
        lp.add_constraint(rise, LE, unit.ramp_up, "ramp_up_{}_{}".format(unit.name, t + 1))
        lp.add_constraint(fall, LE, unit.ramp_down, "ramp_down_{}_{}".format(unit.name, t + 1))


def energy_offers(
    position: ActorPosition, portfolio: ProducerPortfolio, forecast: PriceForecast, price_cap
) -> List[EnergyOffer]:
    """
    Supply offers of a producer: each unit output at its cost, and the planned
    deficit I-_t at the forecast tariff pi^{I-}_t
    """
    offers = []
    for t in range(position.periods):
        for unit in portfolio.units:
            volume = position.schedules[unit.name][t]
            if volume > VOLUME_TOLERANCE:
                offers.append(EnergyOffer(position.actor, t + 1, SUPPLY, float(volume), unit.cost[t], unit.name))
        deficit = position.imbalance_minus[t]
        if deficit > VOLUME_TOLERANCE:
            price = min(float(forecast.imbalance_minus[t]), price_cap)
            offers.append(EnergyOffer(position.actor, t + 1, SUPPLY, float(deficit), price, IMBALANCE_UNIT))
    return offers


def reserve_bids(position: ActorPosition, portfolio: ProducerPortfolio) -> List[ClassicalReserveBid]:
    """Upward and downward reserve bids of every unit, activated at the unit cost"""
    bids = []
    for t in range(position.periods):
        for unit in portfolio.units:
            for direction, volumes in ((UP, position.unit_up), (DOWN, position.unit_down)):
                volume = volumes.get(unit.name, np.zeros(position.periods))[t]
                if volume > VOLUME_TOLERANCE:
                    bids.append(
                        ClassicalReserveBid(
                            position.actor, t + 1, direction, float(volume), float(unit.cost[t]), unit=unit.name
                        )
                    )
    return bids


def producer_to_offers(
    position: ActorPosition, portfolio: ProducerPortfolio, forecast: PriceForecast, price_cap=3000.0
) -> ProducerOffers:
    """Energy offers and reserve bids of one producer position"""
    return ProducerOffers(energy_offers(position, portfolio, forecast, price_cap), reserve_bids(position, portfolio))
