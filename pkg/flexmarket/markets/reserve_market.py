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
Day-ahead secondary reserve market over classical and modulation bids

:organization: CS GROUP - France
:copyright: 2021 CS GROUP - France. All rights reserved.
:license: see LICENSE file.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from flexmarket.exceptions import LPSolverError
from flexmarket.optim.lp_core import EQ, LinearProgram, SolverOptions, solve

LOGGER = logging.getLogger("dev_logger")

UP = "up"
DOWN = "down"
ACCEPTANCE_TOLERANCE = 1e-9

CLASSICAL_COLUMNS = ["actor", "period", "dir", "q_mw", "c_act", "unit"]
MODULATION_COLUMNS = ["actor", "tau", "n", "f_mw", "c_act", "zeta"]


@dataclass(frozen=True)
class ClassicalReserveBid:
    """
    Single-period, single-direction reserve bid

    :param volume: Q, MW offered
    :param activation_price: c^E, EUR/MWh paid on activation
    :param efficiency: zeta, 1 for classical bids
    :param unit: optional tag of the production unit behind the bid
    """

    actor: str
    period: int
    direction: str
    volume: float
    activation_price: float
    efficiency: float = 1.0
    unit: str = ""

    def __post_init__(self):
        if self.direction not in (UP, DOWN):
            raise ValueError("Unknown reserve direction: {}".format(self.direction))
        if not self.volume > 0:
            raise ValueError("Reserve volume must be positive, got {}".format(self.volume))
        if not 0 < self.efficiency <= 1:
            raise ValueError("Efficiency must lie in (0, 1], got {}".format(self.efficiency))
        if self.period < 1:
            raise ValueError("Periods start at 1, got {}".format(self.period))


@dataclass(frozen=True)
class ModulationBid:
    """
    Symmetric flexibility margin [D_t - F, D_t + F] offered over consecutive
    periods, energy neutral over the bid.

    :param start: first covered period (tau), starting at 1
    :param length: number of covered periods (N), even
    :param amplitude: F, MW
    """

    actor: str
    start: int
    length: int
    amplitude: float
    activation_price: float = 0.0
    efficiency: float = 1.0

    def __post_init__(self):
        if self.length < 2 or self.length % 2:
            raise ValueError("Modulation bids need an even length >= 2, got {}".format(self.length))
        if self.start < 1:
            raise ValueError("Periods start at 1, got {}".format(self.start))
        if not self.amplitude >= 0:
            raise ValueError("Amplitude must be non negative, got {}".format(self.amplitude))
        if not 0 < self.efficiency <= 1:
            raise ValueError("Efficiency must lie in (0, 1], got {}".format(self.efficiency))

    @property
    def end(self):
        """Last covered period"""
        return self.start + self.length - 1

    @property
    def periods(self):
        return range(self.start, self.start + self.length)

    @property
    def first_half(self):
        return range(self.start, self.start + self.length // 2)

    @property
    def second_half(self):
        return range(self.start + self.length // 2, self.start + self.length)


@dataclass(frozen=True)
class ReservePrices:
    """Regulated prices of the reserve market, EUR/MWh"""

    capacity_up: float = 45.0
    capacity_down: float = 45.0
    modulation: float = 10.0
    non_contracted: float = 500.0
    over_contract_factor: float = 1.1

    def __post_init__(self):
        for name in ("capacity_up", "capacity_down", "modulation", "non_contracted"):
            if getattr(self, name) < 0:
                raise ValueError("Price {} must be non negative".format(name))


@dataclass
class ReserveProcurement:
    """
    Outcome of :func:`clear_reserve`. Per-period arrays are indexed by period - 1.
    capacity_cost is the reservation payment of the SO, objective the full
    clearing objective (assumed activation and penalties included).
    """

    classical: List[ClassicalReserveBid]
    modulation: List[ModulationBid]
    classical_acceptance: np.ndarray
    modulation_acceptance: np.ndarray
    requirement_up: np.ndarray
    requirement_down: np.ndarray
    over_up: np.ndarray
    over_down: np.ndarray
    short_up: np.ndarray
    short_down: np.ndarray
    penalties: np.ndarray
    capacity_cost: float
    objective: float

    @property
    def procurement_cost(self):
        return self.capacity_cost

    @property
    def periods(self):
        return len(self.requirement_up)

    def contracted_classical(self):
        """(bid, contracted MW) of every accepted classical bid"""
        return [
            (bid, bid.volume * x)
            for bid, x in zip(self.classical, self.classical_acceptance)
            if x > ACCEPTANCE_TOLERANCE
        ]

    def contracted_modulation(self):
        """(bid, contracted amplitude MW) of every accepted modulation bid"""
        return [
            (bid, bid.amplitude * x)
            for bid, x in zip(self.modulation, self.modulation_acceptance)
            if x > ACCEPTANCE_TOLERANCE and bid.amplitude > 0
        ]

    def accepted_volume(self, actor, direction, unit=None):
        """Per-period contracted classical MW of an actor (and unit) in one direction"""
        volume = np.zeros(self.periods)
        for bid, contracted in self.contracted_classical():
            if bid.actor == actor and bid.direction == direction and (unit is None or bid.unit == unit):
                volume[bid.period - 1] += contracted
        return volume

    def contracted_amplitudes(self, actor) -> Dict[int, float]:
        """Contracted amplitude of an actor's modulation bids, keyed by start period"""
        return {
            bid.start: amplitude
            for bid, amplitude in self.contracted_modulation()
            if bid.actor == actor
        }

    def effective_volume(self, direction):
        """Per-period contracted volume weighted by efficiency, modulation included"""
        volume = np.zeros(self.periods)
        for bid, contracted in self.contracted_classical():
            if bid.direction == direction:
                volume[bid.period - 1] += contracted * bid.efficiency
        for bid, amplitude in self.contracted_modulation():
            for period in bid.periods:
                volume[period - 1] += amplitude * bid.efficiency
        return volume


def over_contract_penalty(activation_prices: Sequence[float], default, factor=1.1):
    """
    Penalty c^o_t on reserve contracted above the requirement of a period

    :param activation_prices: activation prices of the downward classical bids of the period
    :param default: value used when the period has no downward bid
    :param factor: margin above the most expensive activation price
    :rtype: float
    """
    if len(activation_prices) == 0:
        return float(default)
    return factor * max(activation_prices)


def over_contract_penalties(
    classical: Sequence[ClassicalReserveBid],
    modulation: Sequence[ModulationBid],
    periods,
    prices: ReservePrices,
):
    """
    c^o_t for every period. A period without downward bid falls back on the
    largest positive activation price of the day, or on the non-contracted
    price when there is none, both scaled by the over-contract factor.

    :rtype: numpy.ndarray
    """
    seen = [bid.activation_price for bid in classical] + [bid.activation_price for bid in modulation]
    day_max = max([price for price in seen if price > 0], default=0.0)
    default = prices.over_contract_factor * (day_max if day_max > 0 else prices.non_contracted)
    down_prices: List[List[float]] = [[] for _ in range(periods)]
    for bid in classical:
        if bid.direction == DOWN:
            down_prices[bid.period - 1].append(bid.activation_price)
    return np.array(
        [over_contract_penalty(down, default, prices.over_contract_factor) for down in down_prices]
    )


def check_modulation_bids(modulation: Sequence[ModulationBid], periods):
    """
    :raises ValueError: when a bid leaves the horizon or overlaps another bid of its actor
    """
    by_actor: Dict[str, List[ModulationBid]] = {}
    for bid in modulation:
        if bid.end > periods:
            raise ValueError("Modulation bid {} ends after period {}".format(bid, periods))
        by_actor.setdefault(bid.actor, []).append(bid)
    for actor, bids in by_actor.items():
        bids = sorted(bids, key=lambda bid: bid.start)
        for previous, current in zip(bids, bids[1:]):
            if current.start <= previous.end:
                raise ValueError("Overlapping modulation bids of {}: {} and {}".format(actor, previous, current))


def clear_reserve(
    classical: Sequence[ClassicalReserveBid],
    modulation: Sequence[ModulationBid],
    requirement_up,
    requirement_down,
    prices: ReservePrices,
    solver_options: Optional[SolverOptions] = None,
) -> ReserveProcurement:
    """
    Selects the reserve bids minimizing reservation plus assumed activation cost.

    Each bid gets an acceptance x in [0, 1]. A modulation bid counts, weighted by
    its efficiency, toward both the upward and the downward requirement of every
    period it covers. Shortfalls are bought as non-contracted reserve, excess is
    penalized by c^o_t.

    :param classical: classical bids
    :param modulation: modulation bids
    :param requirement_up: R+_t, MW per period
    :param requirement_down: R-_t, MW per period
    :param prices: regulated prices
    :param solver_options: LP solver options
    :return: the procurement
    """
    classical = list(classical)
    modulation = list(modulation)
    requirement_up = np.asarray(requirement_up, dtype=float)
    requirement_down = np.asarray(requirement_down, dtype=float)
    periods = len(requirement_up)
    if len(requirement_down) != periods:
        raise ValueError("Upward and downward requirements differ in length")
    if (requirement_up < 0).any() or (requirement_down < 0).any():
        raise ValueError("Reserve requirements must be non negative")
    for bid in classical:
        if bid.period > periods:
            raise ValueError("Reserve bid {} is outside the {} periods".format(bid, periods))
    check_modulation_bids(modulation, periods)
    penalties = over_contract_penalties(classical, modulation, periods, prices)

    lp = LinearProgram("reserve_clearing", "min")
    rows_up: List[Dict[int, float]] = [{} for _ in range(periods)]
    rows_down: List[Dict[int, float]] = [{} for _ in range(periods)]
    classical_vars = []
    for number, bid in enumerate(classical):
        if bid.direction == UP:
            cost = (prices.capacity_up + bid.activation_price) * bid.volume
            rows = rows_up
        else:
            cost = (prices.capacity_down - bid.activation_price) * bid.volume
            rows = rows_down
        var = lp.add_variable("x_c{}".format(number), 0.0, 1.0, cost)
        rows[bid.period - 1][var] = bid.volume * bid.efficiency
        classical_vars.append(var)
    modulation_vars = []
    for number, bid in enumerate(modulation):
        cost = (prices.modulation + bid.activation_price) * bid.amplitude
        var = lp.add_variable("x_m{}".format(number), 0.0, 1.0, cost)
        for period in bid.periods:
            rows_up[period - 1][var] = bid.amplitude * bid.efficiency
            rows_down[period - 1][var] = bid.amplitude * bid.efficiency
        modulation_vars.append(var)

    slack_vars = []
    for t in range(periods):
        over_up = lp.add_variable("s_up_{}".format(t + 1), cost=penalties[t])
        over_down = lp.add_variable("s_down_{}".format(t + 1), cost=penalties[t])
        short_up = lp.add_variable("n_up_{}".format(t + 1), cost=prices.non_contracted)
        short_down = lp.add_variable("n_down_{}".format(t + 1), cost=prices.non_contracted)
        rows_up[t][short_up] = 1.0
        rows_up[t][over_up] = -1.0
        rows_down[t][short_down] = 1.0
        rows_down[t][over_down] = -1.0
        lp.add_constraint(rows_up[t], EQ, requirement_up[t], "req_up_{}".format(t + 1))
        lp.add_constraint(rows_down[t], EQ, requirement_down[t], "req_down_{}".format(t + 1))
        slack_vars.append((over_up, over_down, short_up, short_down))

    solution = solve(lp, solver_options)
    if not solution.is_optimal:
        raise LPSolverError("Reserve clearing ended {}".format(solution.status))
    values = solution.values
    classical_acceptance = np.array([values[var] for var in classical_vars])
    modulation_acceptance = np.array([values[var] for var in modulation_vars])
    slacks = np.array([[values[var] for var in row] for row in slack_vars]).reshape(periods, 4)

    capacity_cost = 0.0
    for bid, x in zip(classical, classical_acceptance):
        price = prices.capacity_up if bid.direction == UP else prices.capacity_down
        capacity_cost += price * bid.volume * x
    for bid, x in zip(modulation, modulation_acceptance):
        capacity_cost += prices.modulation * bid.amplitude * x

    LOGGER.info(
        "Reserve market cleared: capacity cost %.2f, non-contracted %.3f MW",
        capacity_cost,
        slacks[:, 2].sum() + slacks[:, 3].sum(),
    )
    return ReserveProcurement(
        classical,
        modulation,
        classical_acceptance,
        modulation_acceptance,
        requirement_up,
        requirement_down,
        slacks[:, 0],
        slacks[:, 1],
        slacks[:, 2],
        slacks[:, 3],
        penalties,
        capacity_cost,
        solution.objective,
    )


def write_classical_bids(bids: Sequence[ClassicalReserveBid], path):
    pd.DataFrame(
        [[b.actor, b.period, b.direction, b.volume, b.activation_price, b.unit] for b in bids],
        columns=CLASSICAL_COLUMNS,
    ).to_csv(path, index=False)


def read_classical_bids(path) -> List[ClassicalReserveBid]:
    frame = pd.read_csv(path, float_precision="round_trip", keep_default_na=False)
    return [
        ClassicalReserveBid(
            str(row.actor), int(row.period), str(row.dir), float(row.q_mw), float(row.c_act), unit=str(row.unit)
        )
        for row in frame.itertuples(index=False)
    ]


def write_modulation_bids(bids: Sequence[ModulationBid], path):
    pd.DataFrame(
        [[b.actor, b.start, b.length, b.amplitude, b.activation_price, b.efficiency] for b in bids],
        columns=MODULATION_COLUMNS,
    ).to_csv(path, index=False)


def read_modulation_bids(path) -> List[ModulationBid]:
    frame = pd.read_csv(path, float_precision="round_trip", keep_default_na=False)
    return [
        ModulationBid(str(row.actor), int(row.tau), int(row.n), float(row.f_mw), float(row.c_act), float(row.zeta))
        for row in frame.itertuples(index=False)
    ]


def write_procurement(result: ReserveProcurement, directory):
    """
    Writes reserve_acceptance.csv (one row per bid) and reserve_periods.csv
    (requirements, slacks and penalty per period) in a directory
    """
    directory = Path(directory)
    rows = [
        ["classical", i, bid.actor, bid.period, bid.direction, x]
        for i, (bid, x) in enumerate(zip(result.classical, result.classical_acceptance))
    ]
    rows += [
        ["modulation", i, bid.actor, bid.start, "both", x]
        for i, (bid, x) in enumerate(zip(result.modulation, result.modulation_acceptance))
    ]
    pd.DataFrame(rows, columns=["kind", "bid_id", "actor", "period", "dir", "acceptance"]).to_csv(
        directory / "reserve_acceptance.csv", index=False
    )
    pd.DataFrame(
        {
            "period": np.arange(1, result.periods + 1),
            "requirement_up": result.requirement_up,
            "requirement_down": result.requirement_down,
            "over_up": result.over_up,
            "over_down": result.over_down,
            "short_up": result.short_up,
            "short_down": result.short_down,
            "penalty": result.penalties,
        }
    ).to_csv(directory / "reserve_periods.csv", index=False)
