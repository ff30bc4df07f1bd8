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
Actor data: flexible tank loads, production units, portfolios, learned
thresholds and the positions actors take in a round.

Per-period arrays are indexed by period - 1. The energy of a tank after period
t is bounded by the energy limits of period t + 1, the last period reusing its
own limits.

:organization: CS GROUP - France
:copyright: 2021 CS GROUP - France. All rights reserved.
:license: see LICENSE file.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from flexmarket.exceptions import ConfigurationError
from flexmarket.markets.reserve_market import ModulationBid
from flexmarket.optim.lp_core import SolverOptions

RETAILER = "retailer"
PRODUCER = "producer"

VOLUME_TOLERANCE = 1e-9
PRICE_TOLERANCE = 1e-9


def _series(values, periods, label):
    array = np.asarray(values, dtype=float)
    if array.ndim == 0:
        array = np.full(periods, float(array))
    if array.shape != (periods,):
        raise ConfigurationError("{} must have {} values, got shape {}".format(label, periods, array.shape))
    return array


@dataclass
class TankLoad:
    """
    A flexible load represented by an energy tank

    :param power_min: d^min_t, MW
    :param power_max: d^max_t, MW
    :param energy_min: e^min_t, MWh
    :param energy_max: e^max_t, MWh
    :param efficiency: eta in (0, 1]
    :param losses: phi_t, MWh lost each period
    :param total_min: xi^min, MWh consumed over the horizon
    :param total_max: xi^max
    :param initial_energy: e_1, MWh
    :param period_hours: Delta t
    """

    name: str
    power_min: np.ndarray
    power_max: np.ndarray
    energy_min: np.ndarray
    energy_max: np.ndarray
    efficiency: float
    losses: np.ndarray
    total_min: float
    total_max: float
    initial_energy: float
    period_hours: float = 1.0

    def __post_init__(self):
        periods = np.size(self.power_max)
        self.power_min = _series(self.power_min, periods, "power_min")
        self.power_max = _series(self.power_max, periods, "power_max")
        self.energy_min = _series(self.energy_min, periods, "energy_min")
        self.energy_max = _series(self.energy_max, periods, "energy_max")
        self.losses = _series(self.losses, periods, "losses")
        if (self.power_min > self.power_max).any():
            raise ConfigurationError("Load {}: power_min above power_max".format(self.name))
        if (self.energy_min > self.energy_max).any():
            raise ConfigurationError("Load {}: energy_min above energy_max".format(self.name))
        if self.total_min > self.total_max:
            raise ConfigurationError("Load {}: total_min above total_max".format(self.name))
        if not 0 < self.efficiency <= 1:
            raise ConfigurationError("Load {}: efficiency {} outside (0, 1]".format(self.name, self.efficiency))
        if not self.energy_min[0] <= self.initial_energy <= self.energy_max[0]:
            raise ConfigurationError(
                "Load {}: initial energy {} outside [{}, {}]".format(
                    self.name, self.initial_energy, self.energy_min[0], self.energy_max[0]
                )
            )
        if not self.period_hours > 0:
            raise ConfigurationError("Load {}: period length must be positive".format(self.name))

    @property
    def periods(self):
        return len(self.power_max)

    def energy_bounds_after(self, index):
        """Bounds of the energy after the period of 0-based index"""
        bound = min(index + 1, self.periods - 1)
        return self.energy_min[bound], self.energy_max[bound]

    def trajectory(self, schedule, start=0, initial=None):
        """
        Energy of the tank after each period of a schedule

        :param schedule: consumption, MW, for periods start, start + 1, ...
        :param start: 0-based index of the first period
        :param initial: energy before the first period, e_1 when None
        :return: energies after each period of the schedule
        """
        energy = self.initial_energy if initial is None else initial
        gain = self.efficiency * self.period_hours * np.asarray(schedule, dtype=float)
        return energy + np.cumsum(gain - self.losses[start:start + len(gain)])

    def max_violation(self, schedule):
        """Largest violation of the power, energy and total limits by a full schedule"""
        schedule = np.asarray(schedule, dtype=float)
        energy = self.trajectory(schedule)
        upper = np.array([self.energy_bounds_after(t)[1] for t in range(self.periods)])
        lower = np.array([self.energy_bounds_after(t)[0] for t in range(self.periods)])
        total = schedule.sum() * self.period_hours
        return max(
            0.0,
            float(np.max(self.power_min - schedule)),
            float(np.max(schedule - self.power_max)),
            float(np.max(lower - energy)),
            float(np.max(energy - upper)),
            self.total_min - total,
            total - self.total_max,
        )


@dataclass
class ProductionUnit:
    """
    A production unit

    :param output_min: p^min_t, MW
    :param output_max: p^max_t, MW
    :param ramp_up: rho^u, MW per period
    :param ramp_down: rho^d, MW per period
    :param cost: c_t, EUR/MWh
    :param initial_output: p_0, no ramp limit on the first period when None
    """

    name: str
    output_min: np.ndarray
    output_max: np.ndarray
    ramp_up: float
    ramp_down: float
    cost: np.ndarray
    initial_output: Optional[float] = None

    def __post_init__(self):
        periods = np.size(self.output_max)
        self.output_min = _series(self.output_min, periods, "output_min")
        self.output_max = _series(self.output_max, periods, "output_max")
        self.cost = _series(self.cost, periods, "cost")
        if (self.output_min < 0).any() or (self.output_min > self.output_max).any():
            raise ConfigurationError("Unit {}: need 0 <= output_min <= output_max".format(self.name))
        if self.ramp_up < 0 or self.ramp_down < 0:
            raise ConfigurationError("Unit {}: ramps must be non negative".format(self.name))

    @property
    def periods(self):
        return len(self.output_max)


@dataclass
class Thresholds:
    """
    Volumes learned from extreme prices.

    market is D^max_t for a retailer (infinite until learned) or P^min_t for a
    producer (0 until learned). quiet_* count the rounds since the last event.
    """

    kind: str
    market: np.ndarray
    imbalance_plus: np.ndarray
    imbalance_minus: np.ndarray
    quiet_market: np.ndarray
    quiet_plus: np.ndarray
    quiet_minus: np.ndarray

    @classmethod
    def initial(cls, kind, periods):
        market = np.full(periods, math.inf) if kind == RETAILER else np.zeros(periods)
        return cls(
            kind,
            market,
            np.full(periods, math.inf),
            np.full(periods, math.inf),
            np.zeros(periods, dtype=int),
            np.zeros(periods, dtype=int),
            np.zeros(periods, dtype=int),
        )

    @property
    def market_default(self):
        return math.inf if self.kind == RETAILER else 0.0

    def copy(self):
        return Thresholds(
            self.kind,
            self.market.copy(),
            self.imbalance_plus.copy(),
            self.imbalance_minus.copy(),
            self.quiet_market.copy(),
            self.quiet_plus.copy(),
            self.quiet_minus.copy(),
        )


@dataclass
class RetailerPortfolio:
    """Inelastic demand nu_t plus the flexible loads of a retailer"""

    name: str
    inelastic: np.ndarray
    loads: List[TankLoad] = field(default_factory=list)
    thresholds: Optional[Thresholds] = None
    period_hours: float = 1.0

    def __post_init__(self):
        self.inelastic = np.asarray(self.inelastic, dtype=float)
        if (self.inelastic < 0).any():
            raise ConfigurationError("Retailer {}: negative inelastic demand".format(self.name))
        for load in self.loads:
            if load.periods != self.periods:
                raise ConfigurationError("Load {} does not span {} periods".format(load.name, self.periods))
        if self.thresholds is None:
            self.thresholds = Thresholds.initial(RETAILER, self.periods)

    @property
    def periods(self):
        return len(self.inelastic)

    def capacity(self):
        """Largest consumption per period"""
        return self.inelastic + sum((load.power_max for load in self.loads), np.zeros(self.periods))


@dataclass
class ProducerPortfolio:
    """Production units of a producer and its reserve valuation eta_t"""

    name: str
    units: List[ProductionUnit]
    thresholds: Optional[Thresholds] = None
    reserve_valuation: float = 0.005
    period_hours: float = 1.0

    def __post_init__(self):
        if not self.units:
            raise ConfigurationError("Producer {} has no unit".format(self.name))
        for unit in self.units:
            if unit.periods != self.periods:
                raise ConfigurationError("Unit {} does not span {} periods".format(unit.name, self.periods))
        if self.thresholds is None:
            self.thresholds = Thresholds.initial(PRODUCER, self.periods)

    @property
    def periods(self):
        return self.units[0].periods

    def capacity(self):
        return sum((unit.output_max for unit in self.units), np.zeros(self.periods))


@dataclass
class AgentSettings:
    """Market constants every actor model needs"""

    price_cap: float = 3000.0
    non_contracted_price: float = 500.0
    modulation_price: float = 10.0
    modulation_efficiency: float = 0.5
    imbalance_limit_ratio: float = 0.1
    tie_bonus: float = 1e-6
    solver_options: SolverOptions = field(default_factory=SolverOptions)


@dataclass
class PriceForecast:
    """
    Forecasts of the energy price and imbalance tariffs, plus whether the
    last observed value was an extreme one (cap, 0 or pi^nc)
    """

    energy: np.ndarray
    imbalance_plus: np.ndarray
    imbalance_minus: np.ndarray
    cap_observed: np.ndarray
    plus_extreme: np.ndarray
    minus_extreme: np.ndarray

    @classmethod
    def flat(cls, periods, energy, imbalance_plus, imbalance_minus=None):
        """Constant forecast, mostly for tests and initial rounds"""
        if imbalance_minus is None:
            imbalance_minus = imbalance_plus
        flags = np.zeros(periods, dtype=bool)
        return cls(
            _series(energy, periods, "energy"),
            _series(imbalance_plus, periods, "imbalance_plus"),
            _series(imbalance_minus, periods, "imbalance_minus"),
            flags,
            flags.copy(),
            flags.copy(),
        )

    @property
    def periods(self):
        return len(self.energy)


@dataclass
class ActorPosition:
    """
    Decisions of an actor for one stage of a round.

    energy is D_t (retailer) or P_t (producer). schedules holds d_{i,t} per load
    or p_{i,t} per unit; unit_up and unit_down the reserve of each unit;
    scenario_up and scenario_down the modulation scenarios of each load, equal
    to the baseline outside the modulation bids.
    """

    actor: str
    kind: str
    stage: str
    energy: np.ndarray
    imbalance_plus: np.ndarray
    imbalance_minus: np.ndarray
    reserve_up: np.ndarray
    reserve_down: np.ndarray
    schedules: Dict[str, np.ndarray] = field(default_factory=dict)
    unit_up: Dict[str, np.ndarray] = field(default_factory=dict)
    unit_down: Dict[str, np.ndarray] = field(default_factory=dict)
    modulation: List[ModulationBid] = field(default_factory=list)
    scenario_up: Dict[str, np.ndarray] = field(default_factory=dict)
    scenario_down: Dict[str, np.ndarray] = field(default_factory=dict)
    objective: float = 0.0

    @property
    def periods(self):
        return len(self.energy)

    @property
    def amplitudes(self):
        return np.array([bid.amplitude for bid in self.modulation], dtype=float)

    @property
    def net_imbalance(self):
        """I+_t - I-_t"""
        return self.imbalance_plus - self.imbalance_minus

    def state_vector(self):
        """Volumes compared when looking for repeated rounds"""
        return np.concatenate(
            [
                self.energy,
                self.imbalance_plus,
                self.imbalance_minus,
                self.reserve_up,
                self.reserve_down,
                self.amplitudes,
            ]
        )


def _is_extreme_tariff(value, non_contracted_price):
    return value <= PRICE_TOLERANCE or value >= non_contracted_price - PRICE_TOLERANCE


def _update(current, quiet, fired, learned, default, memory):
    updated = current.copy()
    quiet = quiet.copy()
    updated[fired] = learned[fired]
    quiet[fired] = 0
    quiet[~fired] += 1
    expired = (~fired) & (quiet >= memory) & (updated != default)
    updated[expired] = default
    quiet[expired] = 0
    return updated, quiet


def learn_thresholds(
    thresholds: Thresholds,
    submitted,
    imbalance_plus,
    imbalance_minus,
    energy_prices,
    tariff_plus,
    tariff_minus,
    price_cap,
    non_contracted_price,
    factor=0.95,
    memory=10,
) -> Thresholds:
    """
    Updates the learned thresholds after a round.

    When pi^E_t hit the cap, a retailer sets D^max_t = factor * D_t and a
    producer P^min_t = P_t / factor. When a tariff was 0 or pi^nc and the actor
    had an imbalance in that direction, I^max_t = factor * I_t. A threshold
    without a new event for ``memory`` rounds is forgotten.

    :param thresholds: thresholds before the round
    :param submitted: D_t or P_t submitted to the energy market
    :param imbalance_plus: I+_t of the actor
    :param imbalance_minus: I-_t of the actor
    :param energy_prices: cleared pi^E_t
    :param tariff_plus: pi^{I+}_t
    :param tariff_minus: pi^{I-}_t
    :return: new thresholds
    """
    submitted = np.asarray(submitted, dtype=float)
    imbalance_plus = np.asarray(imbalance_plus, dtype=float)
    imbalance_minus = np.asarray(imbalance_minus, dtype=float)
    capped = (np.asarray(energy_prices) >= price_cap - PRICE_TOLERANCE) & (submitted > VOLUME_TOLERANCE)
    if thresholds.kind == RETAILER:
        market_learned = factor * submitted
    else:
        market_learned = submitted / factor
    plus_fired = _is_extreme_tariff(np.asarray(tariff_plus), non_contracted_price) & (
        imbalance_plus > VOLUME_TOLERANCE
    )
    minus_fired = _is_extreme_tariff(np.asarray(tariff_minus), non_contracted_price) & (
        imbalance_minus > VOLUME_TOLERANCE
    )

    market, quiet_market = _update(
        thresholds.market, thresholds.quiet_market, capped, market_learned, thresholds.market_default, memory
    )
    plus, quiet_plus = _update(
        thresholds.imbalance_plus, thresholds.quiet_plus, plus_fired, factor * imbalance_plus, math.inf, memory
    )
    minus, quiet_minus = _update(
        thresholds.imbalance_minus, thresholds.quiet_minus, minus_fired, factor * imbalance_minus, math.inf, memory
    )
    return Thresholds(thresholds.kind, market, plus, minus, quiet_market, quiet_plus, quiet_minus)
