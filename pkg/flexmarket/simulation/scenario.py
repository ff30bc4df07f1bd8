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
Seeded generation of actor portfolios

:organization: CS GROUP - France
:copyright: 2021 CS GROUP - France. All rights reserved.
:license: see LICENSE file.
"""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from flexmarket.agents.portfolios import ProducerPortfolio, ProductionUnit, RetailerPortfolio, TankLoad
from flexmarket.exceptions import ConfigurationError
from flexmarket.simulation.config import ScenarioConfig

LOGGER = logging.getLogger("dev_logger")


@dataclass
class Scenario:
    retailers: List[RetailerPortfolio]
    producers: List[ProducerPortfolio]

    @property
    def periods(self):
        return self.retailers[0].periods

    def total_demand(self):
        """Mean consumption per period: inelastic demand plus the mean power of every load"""
        total = sum((retailer.inelastic for retailer in self.retailers), np.zeros(self.periods))
        for retailer in self.retailers:
            for load in retailer.loads:
                total = total + load.losses / (load.efficiency * load.period_hours)
        return total


def demand_profile(config: ScenarioConfig):
    """Demand shape resampled to the horizon, with a mean of 1"""
    shape = np.asarray(config.demand_shape, dtype=float)
    if len(shape) != config.periods:
        shape = np.interp(np.linspace(0, len(shape) - 1, config.periods), np.arange(len(shape)), shape)
    return shape / shape.mean()


def _producers(config: ScenarioConfig, rng, peak):
    families = (
        ("slow", config.slow_units, config.slow_capacity_ratio, config.slow_ramp_ratio,
         config.slow_cost_min, config.slow_cost_max),
        ("fast", config.fast_units, config.fast_capacity_ratio, config.fast_ramp_ratio,
         config.fast_cost_min, config.fast_cost_max),
    )
    producers = []
    for number in range(1, config.producers + 1):
        name = "producer_{}".format(number)
        units = []
        for family, count, ratio, ramp_ratio, cost_min, cost_max in families:
            if count <= 0:
                continue
            capacity = ratio * peak / (config.producers * count)
            for index in range(1, count + 1):
                units.append(
                    ProductionUnit(
                        "{}_{}_{}".format(name, family, index),
                        output_min=np.zeros(config.periods),
                        output_max=np.full(config.periods, capacity),
                        ramp_up=ramp_ratio * capacity,
                        ramp_down=ramp_ratio * capacity,
                        cost=np.full(config.periods, rng.uniform(cost_min, cost_max)),
                    )
                )
        producers.append(
            ProducerPortfolio(
                name,
                units,
                reserve_valuation=config.reserve_valuation,
                period_hours=config.period_hours,
            )
        )
    return producers


def _load(config: ScenarioConfig, rng, name, mean):
    hours = config.period_hours
    efficiency = rng.uniform(config.load_efficiency_min, config.load_efficiency_max)
    capacity = mean * rng.uniform(config.storage_hours_min, config.storage_hours_max)
    need = config.periods * mean * hours
    return TankLoad(
        name,
        power_min=0.0,
        power_max=mean * rng.uniform(config.load_power_ratio_min, config.load_power_ratio_max),
        energy_min=0.0,
        energy_max=capacity,
        efficiency=efficiency,
        losses=efficiency * mean * hours,
        total_min=(1.0 - config.xi_tolerance) * need,
        total_max=(1.0 + config.xi_tolerance) * need,
        initial_energy=capacity / 2.0,
        period_hours=hours,
    )


def generate_scenario(config: ScenarioConfig) -> Scenario:
    """
    Builds the producers and retailers of a configuration.

    Production units are drawn first so the same seed gives the same producers
    whatever the flexibility rate. Each tank load keeps its level by consuming
    its mean power, so the generated schedules are always feasible.

    :raises ConfigurationError: when the rate asks for flexible loads no retailer can hold
    """
    if not 0 <= config.flexibility_rate <= 1:
        raise ConfigurationError("flexibility_rate must lie in [0, 1], got {}".format(config.flexibility_rate))
    rng = np.random.default_rng(config.seed)
    shape = demand_profile(config)
    producers = _producers(config, rng, config.mean_consumption * shape.max())

    load_count = config.retailers * config.loads_per_retailer if config.flexibility_rate > 0 else 0
    if config.flexibility_rate > 0 and load_count == 0:
        raise ConfigurationError("A positive flexibility rate needs loads_per_retailer > 0")
    inelastic = (1.0 - config.flexibility_rate) * config.mean_consumption * shape / config.retailers
    mean = config.flexibility_rate * config.mean_consumption / load_count if load_count else 0.0
    retailers = []
    for number in range(1, config.retailers + 1):
        name = "retailer_{}".format(number)
        loads = []
        if load_count:
            loads = [
                _load(config, rng, "{}_load_{}".format(name, index), mean)
                for index in range(1, config.loads_per_retailer + 1)
            ]
        retailers.append(RetailerPortfolio(name, inelastic.copy(), loads, period_hours=config.period_hours))
    LOGGER.info(
        "Scenario: %d producers, %d retailers, %d flexible loads of %.3f MW",
        len(producers),
        len(retailers),
        load_count,
        mean,
    )
    return Scenario(retailers, producers)
