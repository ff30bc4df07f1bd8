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
Imbalance settlement: optimal activation of the contracted reserves, imbalance
tariffs and fees.

Sign convention: the system imbalance I_t is the sum over actors of
(I+ - I-). I_t > 0 is a surplus, restored by downward activation; I_t < 0 is a
deficit, restored by upward activation. The tariff pi^{I+} charged on surplus
volumes I+ is the price of downward activation, the tariff pi^{I-} charged on
deficit volumes I- is the price of upward activation.

:organization: CS GROUP - France
:copyright: 2021 CS GROUP - France. All rights reserved.
:license: see LICENSE file.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from flexmarket.exceptions import LPSolverError
from flexmarket.markets.reserve_market import (
    UP,
    ClassicalReserveBid,
    ModulationBid,
    ReserveProcurement,
)
from flexmarket.optim.lp_core import EQ, LinearProgram, SolverOptions, solve

LOGGER = logging.getLogger("dev_logger")

ACTIVATION_TOLERANCE = 1e-7

SETTLEMENT_COLUMNS = [
    "period",
    "I_t",
    "activated_up",
    "activated_down",
    "y_up",
    "y_down",
    "tariff_up",
    "tariff_down",
]


@dataclass
class SettlementResult:
    """
    Activation chosen by the SO for one day.

    classical_activation[i] applies to the contracted volume of classical[i];
    modulation_up[k, t - 1] and modulation_down[k, t - 1] (v and w) apply to the
    contracted amplitude of modulation[k] and are zero outside its periods.
    tariff_plus and tariff_minus are filled by :func:`settle`.
    """

    imbalance: np.ndarray
    classical: List[Tuple[ClassicalReserveBid, float]]
    modulation: List[Tuple[ModulationBid, float]]
    classical_activation: np.ndarray
    modulation_up: np.ndarray
    modulation_down: np.ndarray
    non_contracted_up: np.ndarray
    non_contracted_down: np.ndarray
    penalties: np.ndarray
    cost: float
    tariff_plus: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tariff_minus: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fees: Dict[str, float] = field(default_factory=dict)

    @property
    def periods(self):
        return len(self.imbalance)

    def activated_up(self):
        """Upward MW activated on contracted bids, per period"""
        volume = np.zeros(self.periods)
        for (bid, contracted), share in zip(self.classical, self.classical_activation):
            if bid.direction == UP:
                volume[bid.period - 1] += contracted * share
        for k, (bid, amplitude) in enumerate(self.modulation):
            volume += amplitude * self.modulation_up[k]
        return volume

    def activated_down(self):
        """Downward MW activated on contracted bids, per period"""
        volume = np.zeros(self.periods)
        for (bid, contracted), share in zip(self.classical, self.classical_activation):
            if bid.direction != UP:
                volume[bid.period - 1] += contracted * share
        for k, (bid, amplitude) in enumerate(self.modulation):
            volume += amplitude * self.modulation_down[k]
        return volume

    def balance_residual(self):
        """Per-period residual of the power balance, zero when settled"""
        return (
            self.activated_up()
            - self.activated_down()
            + self.non_contracted_up
            - self.non_contracted_down
            + self.imbalance
        )


def settle(
    imbalance,
    procurement: ReserveProcurement,
    non_contracted_price,
    solver_options: Optional[SolverOptions] = None,
) -> SettlementResult:
    """
    Computes the cheapest activation of the contracted reserves restoring the
    balance of every period, then the imbalance tariffs.

    Downward classical bids cost (c^o_t - c^E) per MWh, the penalty c^o_t being
    the one used when the reserve market was cleared. Modulation bids are
    activated upward (v) or downward (w) per period, with a zero net energy over
    their periods.

    :param imbalance: I_t, MW per period
    :param procurement: the cleared reserve market
    :param non_contracted_price: pi^nc, EUR/MWh
    :param solver_options: LP solver options
    :return: the settlement, tariffs included
    """
    imbalance = np.asarray(imbalance, dtype=float)
    periods = len(imbalance)
    if periods != procurement.periods:
        raise ValueError("Imbalance covers {} periods, reserves {}".format(periods, procurement.periods))
    classical = procurement.contracted_classical()
    modulation = procurement.contracted_modulation()
    penalties = procurement.penalties

    lp = LinearProgram("settlement", "min")
    rows: List[Dict[int, float]] = [{} for _ in range(periods)]
    classical_vars = []
    for number, (bid, contracted) in enumerate(classical):
        if bid.direction == UP:
            cost = bid.activation_price * contracted
            sign = 1.0
        else:
            cost = (penalties[bid.period - 1] - bid.activation_price) * contracted
            sign = -1.0
        var = lp.add_variable("a_{}".format(number), 0.0, 1.0, cost)
        rows[bid.period - 1][var] = sign * contracted
        classical_vars.append(var)

    modulation_vars = []
    for number, (bid, amplitude) in enumerate(modulation):
        neutrality: Dict[int, float] = {}
        pairs = {}
        for period in bid.periods:
            up = lp.add_variable("v_{}_{}".format(number, period), 0.0, 1.0, bid.activation_price * amplitude)
            down = lp.add_variable("w_{}_{}".format(number, period), 0.0, 1.0, bid.activation_price * amplitude)
            rows[period - 1][up] = amplitude
            rows[period - 1][down] = -amplitude
            neutrality[up] = 1.0
            neutrality[down] = -1.0
            pairs[period] = (up, down)
        lp.add_constraint(neutrality, EQ, 0.0, "neutral_{}".format(number))
        modulation_vars.append(pairs)

    spill_vars = []
    for t in range(periods):
        spill_up = lp.add_variable("y_up_{}".format(t + 1), cost=non_contracted_price)
        spill_down = lp.add_variable("y_down_{}".format(t + 1), cost=non_contracted_price)
        rows[t][spill_up] = 1.0
        rows[t][spill_down] = -1.0
        lp.add_constraint(rows[t], EQ, -imbalance[t], "balance_{}".format(t + 1))
        spill_vars.append((spill_up, spill_down))

    solution = solve(lp, solver_options)
    if not solution.is_optimal:
        raise LPSolverError("Settlement ended {}".format(solution.status))
    values = solution.values

    modulation_up = np.zeros((len(modulation), periods))
    modulation_down = np.zeros((len(modulation), periods))
    for k, pairs in enumerate(modulation_vars):
        for period, (up, down) in pairs.items():
            # only the net activation matters, both legs of one period cancel out
            net = values[up] - values[down]
            modulation_up[k, period - 1] = max(net, 0.0)
            modulation_down[k, period - 1] = max(-net, 0.0)

    result = SettlementResult(
        imbalance,
        classical,
        modulation,
        np.array([values[var] for var in classical_vars]),
        modulation_up,
        modulation_down,
        np.array([values[up] for up, _ in spill_vars]),
        np.array([values[down] for _, down in spill_vars]),
        np.asarray(penalties, dtype=float),
        solution.objective,
    )
    result.tariff_plus, result.tariff_minus = tariffs(result, non_contracted_price)
    LOGGER.info(
        "Settlement: cost %.2f, non-contracted %.3f MW",
        result.cost,
        result.non_contracted_up.sum() + result.non_contracted_down.sum(),
    )
    return result


def tariffs(result: SettlementResult, non_contracted_price):
    """
    Imbalance tariffs of every period: the activation price of the most expensive
    bid activated in the relevant direction, pi^nc when non-contracted reserve
    was used, 0 without activation.

    :return: (pi^{I+}_t charged on surpluses, pi^{I-}_t charged on deficits)
    :rtype: tuple of numpy.ndarray
    """
    periods = result.periods
    up_price = np.zeros(periods)
    down_price = np.zeros(periods)
    for (bid, contracted), share in zip(result.classical, result.classical_activation):
        if contracted * share <= ACTIVATION_TOLERANCE:
            continue
        target = up_price if bid.direction == UP else down_price
        target[bid.period - 1] = max(target[bid.period - 1], bid.activation_price)
    for k, (bid, amplitude) in enumerate(result.modulation):
        for period in bid.periods:
            if amplitude * result.modulation_up[k, period - 1] > ACTIVATION_TOLERANCE:
                up_price[period - 1] = max(up_price[period - 1], bid.activation_price)
            if amplitude * result.modulation_down[k, period - 1] > ACTIVATION_TOLERANCE:
                down_price[period - 1] = max(down_price[period - 1], bid.activation_price)
    up_price[result.non_contracted_up > ACTIVATION_TOLERANCE] = non_contracted_price
    down_price[result.non_contracted_down > ACTIVATION_TOLERANCE] = non_contracted_price
    return down_price, up_price


def fees(
    tariff_plus,
    tariff_minus,
    imbalances: Mapping[str, Tuple[np.ndarray, np.ndarray]],
    period_hours=1.0,
) -> Dict[str, float]:
    """
    Imbalance fee of every actor: its surplus I+ pays pi^{I+}, its deficit I-
    pays pi^{I-}, period by period, whatever the system position.

    :param tariff_plus: pi^{I+}_t
    :param tariff_minus: pi^{I-}_t
    :param imbalances: actor id -> (I+_t, I-_t) in MW
    :param period_hours: length of a period
    :return: actor id -> fee in EUR
    """
    tariff_plus = np.asarray(tariff_plus, dtype=float)
    tariff_minus = np.asarray(tariff_minus, dtype=float)
    return {
        actor: float(
            (tariff_plus @ np.asarray(plus, dtype=float) + tariff_minus @ np.asarray(minus, dtype=float))
            * period_hours
        )
        for actor, (plus, minus) in imbalances.items()
    }


def settlement_to_frame(result: SettlementResult) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "period": np.arange(1, result.periods + 1),
            "I_t": result.imbalance,
            "activated_up": result.activated_up(),
            "activated_down": result.activated_down(),
            "y_up": result.non_contracted_up,
            "y_down": result.non_contracted_down,
            "tariff_up": result.tariff_minus,
            "tariff_down": result.tariff_plus,
        },
        columns=SETTLEMENT_COLUMNS,
    )


def write_settlement(result: SettlementResult, path):
    settlement_to_frame(result).to_csv(path, index=False)
