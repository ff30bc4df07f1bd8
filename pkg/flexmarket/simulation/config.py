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
Scenario configuration: a flat ``key = value`` file whose reference copy is
packaged as ``config/default.cfg``.

:organization: CS GROUP - France
:copyright: 2021 CS GROUP - France. All rights reserved.
:license: see LICENSE file.
"""

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import List

import pkg_resources

from flexmarket.agents.forecaster import ForecastSettings
from flexmarket.agents.portfolios import AgentSettings
from flexmarket.exceptions import ConfigurationError
from flexmarket.markets.reserve_market import ReservePrices
from flexmarket.optim.lp_core import SolverOptions
from flexmarket.utils import parse_bool, parse_float, parse_list

CLOSED = "closed"
OPEN = "open"
SETTINGS = (CLOSED, OPEN)

DEFAULT_DEMAND_SHAPE = [
    0.70, 0.65, 0.62, 0.60, 0.62, 0.70, 0.85, 1.00, 1.10, 1.12, 1.10, 1.05,
    1.00, 0.98, 0.97, 1.00, 1.08, 1.20, 1.30, 1.28, 1.18, 1.02, 0.88, 0.78,
]

_RANGES = (
    ("slow_cost_min", "slow_cost_max"),
    ("fast_cost_min", "fast_cost_max"),
    ("load_power_ratio_min", "load_power_ratio_max"),
    ("storage_hours_min", "storage_hours_max"),
    ("load_efficiency_min", "load_efficiency_max"),
)

_PRICES = (
    "price_cap",
    "non_contracted_price",
    "capacity_price_up",
    "capacity_price_down",
    "modulation_price",
    "reserve_valuation",
    "reserve_ratio",
)


@dataclass
class ScenarioConfig:
    """Every parameter of a simulation; the packaged default.cfg documents each key"""

    seed: int = 7
    periods: int = 24
    period_hours: float = 1.0
    mean_consumption: float = 1000.0
    flexibility_rate: float = 0.06
    setting: str = CLOSED

    producers: int = 3
    retailers: int = 2
    slow_units: int = 2
    fast_units: int = 1
    loads_per_retailer: int = 2

    slow_cost_min: float = 45.0
    slow_cost_max: float = 60.0
    fast_cost_min: float = 60.0
    fast_cost_max: float = 80.0
    slow_capacity_ratio: float = 1.2
    fast_capacity_ratio: float = 0.45
    slow_ramp_ratio: float = 0.2
    fast_ramp_ratio: float = 1.0

    load_power_ratio_min: float = 1.5
    load_power_ratio_max: float = 2.5
    storage_hours_min: float = 3.0
    storage_hours_max: float = 6.0
    load_efficiency_min: float = 0.85
    load_efficiency_max: float = 0.95
    xi_tolerance: float = 0.1
    demand_shape: List[float] = field(default_factory=lambda: list(DEFAULT_DEMAND_SHAPE))

    price_cap: float = 3000.0
    non_contracted_price: float = 500.0
    capacity_price_up: float = 45.0
    capacity_price_down: float = 45.0
    modulation_price: float = 10.0
    modulation_efficiency: float = 0.5
    reserve_valuation: float = 0.005
    reserve_ratio: float = 0.02
    over_contract_factor: float = 1.1
    modulation_length: int = 4

    forecast_window: int = 24
    forecast_decay: float = 0.5
    initial_energy_forecast: float = 52.5
    initial_imbalance_forecast: float = 50.0

    threshold_factor: float = 0.95
    threshold_memory: int = 10
    imbalance_limit_ratio: float = 0.1

    convergence_tolerance: float = 0.01
    state_tolerance: float = 1e-6
    max_rounds: int = 500
    tail_rounds: int = 24

    solver: str = "simplex"
    bland_after: int = 50
    lp_dump_dir: str = ""
    write_rounds: bool = False

    def __post_init__(self):
        self.demand_shape = [float(value) for value in self.demand_shape]
        if not 0 <= self.flexibility_rate <= 1:
            raise ConfigurationError("flexibility_rate must lie in [0, 1], got {}".format(self.flexibility_rate))
        if self.setting not in SETTINGS:
            raise ConfigurationError("setting must be one of {}, got {}".format(SETTINGS, self.setting))
        if self.solver not in ("simplex", "highs"):
            raise ConfigurationError("Unknown solver: {}".format(self.solver))
        for name in _PRICES:
            if getattr(self, name) < 0:
                raise ConfigurationError("{} must be non negative".format(name))
        for low, high in _RANGES:
            if getattr(self, low) > getattr(self, high):
                raise ConfigurationError("{} is above {}".format(low, high))
        if self.modulation_length < 2 or self.modulation_length % 2:
            raise ConfigurationError(
                "modulation_length must be even and at least 2, got {}".format(self.modulation_length)
            )
        if min(self.periods, self.producers, self.slow_units + self.fast_units, self.max_rounds) < 1:
            raise ConfigurationError("periods, producers, units and max_rounds must be positive")
        if self.retailers < 1 or self.mean_consumption <= 0 or self.period_hours <= 0:
            raise ConfigurationError("retailers, mean_consumption and period_hours must be positive")
        if not self.demand_shape or min(self.demand_shape) < 0 or max(self.demand_shape) <= 0:
            raise ConfigurationError("demand_shape needs non negative values, one of them positive")
        if not (0 < self.load_efficiency_min and self.load_efficiency_max <= 1):
            raise ConfigurationError("Load efficiencies must lie in (0, 1]")
        if not 0 < self.threshold_factor <= 1:
            raise ConfigurationError("threshold_factor must lie in (0, 1]")

    @classmethod
    def from_text(cls, text, base=None):
        """
        Reads ``key = value`` lines over a base configuration (the defaults
        when None). Blank lines and ``#`` comments are ignored.

        :raises ConfigurationError: on an unknown key or an unparsable value
        """
        base = base or cls()
        kinds = {item.name: type(getattr(base, item.name)) for item in fields(cls)}
        values = {}
        for number, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, separator, value = line.partition("=")
            key = key.strip()
            if not separator:
                raise ConfigurationError("Line {}: expected key = value, got {!r}".format(number, line))
            if key not in kinds:
                raise ConfigurationError("Line {}: unknown key {}".format(number, key))
            try:
                values[key] = _convert(kinds[key], value.strip())
            except ValueError as error:
                raise ConfigurationError("Line {}: bad value for {}: {}".format(number, key, error)) from error
        return replace(base, **values)

    @classmethod
    def from_file(cls, path, base=None):
        with open(path) as config_file:
            return cls.from_text(config_file.read(), base)

    def to_text(self):
        """Every key, in declaration order, in a form :meth:`from_text` reads back exactly"""
        return "".join("{} = {}\n".format(item.name, _format(getattr(self, item.name))) for item in fields(self))

    def with_values(self, **values):
        return replace(self, **values)

    def reserve_prices(self) -> ReservePrices:
        return ReservePrices(
            self.capacity_price_up,
            self.capacity_price_down,
            self.modulation_price,
            self.non_contracted_price,
            self.over_contract_factor,
        )

    def solver_options(self) -> SolverOptions:
        return SolverOptions(method=self.solver, bland_after=self.bland_after, dump_dir=self.lp_dump_dir or None)

    def agent_settings(self) -> AgentSettings:
        return AgentSettings(
            price_cap=self.price_cap,
            non_contracted_price=self.non_contracted_price,
            modulation_price=self.modulation_price,
            modulation_efficiency=self.modulation_efficiency,
            imbalance_limit_ratio=self.imbalance_limit_ratio,
            solver_options=self.solver_options(),
        )

    def forecast_settings(self) -> ForecastSettings:
        return ForecastSettings(
            window=self.forecast_window,
            decay=self.forecast_decay,
            price_cap=self.price_cap,
            non_contracted_price=self.non_contracted_price,
            initial_energy=self.initial_energy_forecast,
            initial_imbalance=self.initial_imbalance_forecast,
        )


def _convert(kind, text):
    if kind is bool:
        return parse_bool(text)
    if kind is int:
        return int(text)
    if kind is float:
        return parse_float(text)
    if kind is list:
        return parse_list(text)
    return text


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "inf" if math.isinf(value) and value > 0 else repr(value)
    if isinstance(value, list):
        return ", ".join(_format(float(item)) for item in value)
    return str(value)


def default_config_path() -> Path:
    return Path(pkg_resources.resource_filename("flexmarket", "config/default.cfg"))


def load_config(path=None) -> ScenarioConfig:
    """
    Packaged defaults, overridden by the keys of ``path`` when given

    :raises ConfigurationError: on an unknown key or an invalid value
    """
    config = ScenarioConfig.from_file(default_config_path())
    if path is not None:
        config = ScenarioConfig.from_file(path, config)
    return config
