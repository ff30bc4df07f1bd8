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
Day-ahead energy market: uniform-price clearing of single-period offers

:organization: CS GROUP - France
:copyright: 2021 CS GROUP - France. All rights reserved.
:license: see LICENSE file.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import pandas as pd

LOGGER = logging.getLogger("dev_logger")

SUPPLY = "supply"
DEMAND = "demand"
DEFAULT_PRICE_CAP = 3000.0
VOLUME_TOLERANCE = 1e-9

OFFER_COLUMNS = ["actor", "period", "side", "volume_mw", "price_eur_mwh", "unit"]
CLEARING_COLUMNS = ["period", "mcp", "offer_id", "fraction"]


@dataclass(frozen=True)
class EnergyOffer:
    """
    An offer for one period

    :param actor: id of the offering actor
    :param period: period index, starting at 1
    :param side: "supply" or "demand"
    :param volume: MW, strictly positive
    :param price: limit price in EUR/MWh
    :param unit: optional tag of the asset behind the offer
    """

    actor: str
    period: int
    side: str
    volume: float
    price: float
    unit: str = ""

    def __post_init__(self):
        if self.side not in (SUPPLY, DEMAND):
            raise ValueError("Unknown offer side: {}".format(self.side))
        if not self.volume > 0:
            raise ValueError("Offer volume must be positive, got {}".format(self.volume))
        if not self.price >= 0:
            raise ValueError("Offer price must be non negative, got {}".format(self.price))
        if self.period < 1:
            raise ValueError("Periods start at 1, got {}".format(self.period))


@dataclass
class ClearingResult:
    """
    Outcome of :func:`clear`

    prices[t - 1] is the MCP of period t; fractions[i] is the accepted share of
    offers[i]; undefined[t - 1] flags periods without any offer.
    """

    offers: List[EnergyOffer]
    prices: np.ndarray
    fractions: np.ndarray
    traded: np.ndarray
    undefined: np.ndarray

    @property
    def periods(self):
        return len(self.prices)

    def accepted(self, index):
        """Accepted MW of the offer at this index"""
        return self.offers[index].volume * self.fractions[index]

    def cleared_volume(self, actor, side=None, unit=None):
        """
        Per-period accepted volume of an actor (D_t for retailers, P_t for producers)

        :param actor: actor id
        :param side: restrict to one side when given
        :param unit: restrict to one asset tag when given
        :rtype: numpy.ndarray
        """
        volume = np.zeros(self.periods)
        for offer, fraction in zip(self.offers, self.fractions):
            if offer.actor != actor:
                continue
            if side is not None and offer.side != side:
                continue
            if unit is not None and offer.unit != unit:
                continue
            volume[offer.period - 1] += offer.volume * fraction
        return volume

    def side_volume(self, side):
        """Per-period accepted volume of a whole side of the market"""
        volume = np.zeros(self.periods)
        for offer, fraction in zip(self.offers, self.fractions):
            if offer.side == side:
                volume[offer.period - 1] += offer.volume * fraction
        return volume


def _cumulative(prices, volumes):
    order = np.argsort(prices, kind="stable")
    sorted_prices = prices[order]
    cumulated = np.concatenate([[0.0], np.cumsum(volumes[order])])
    return sorted_prices, cumulated


def clear_period(supply_prices, supply_volumes, demand_prices, demand_volumes, price_cap):
    """
    Clears one period.

    Candidate prices are 0, the cap and every limit price. A candidate is market
    clearing when the volume that must trade (supply strictly below, demand
    strictly above) fits in the volume that may trade (supply at or below,
    demand at or above). The clearing candidate with the largest traded volume
    wins, the lowest price on ties.

    :return: (price, traded volume, supply fractions, demand fractions)
    """
    candidates = np.unique(np.concatenate([[0.0, price_cap], supply_prices, demand_prices]))
    supply_sorted, supply_cum = _cumulative(supply_prices, supply_volumes)
    demand_sorted, demand_cum = _cumulative(demand_prices, demand_volumes)
    demand_total = demand_cum[-1]

    supply_at_most = supply_cum[np.searchsorted(supply_sorted, candidates, side="right")]
    supply_below = supply_cum[np.searchsorted(supply_sorted, candidates, side="left")]
    demand_at_least = demand_total - demand_cum[np.searchsorted(demand_sorted, candidates, side="left")]
    demand_above = demand_total - demand_cum[np.searchsorted(demand_sorted, candidates, side="right")]

    must_trade = np.maximum(supply_below, demand_above)
    may_trade = np.minimum(supply_at_most, demand_at_least)
    clearing = must_trade <= may_trade + VOLUME_TOLERANCE
    traded = np.where(clearing, may_trade, -np.inf)
    best = int(np.flatnonzero(traded >= traded.max() - VOLUME_TOLERANCE)[0])
    price = float(candidates[best])
    volume = float(max(may_trade[best], 0.0))

    supply_fractions = _fractions(
        supply_prices < price, supply_prices == price, supply_volumes, volume - supply_below[best]
    )
    demand_fractions = _fractions(
        demand_prices > price, demand_prices == price, demand_volumes, volume - demand_above[best]
    )
    return price, volume, supply_fractions, demand_fractions


def _fractions(inside, marginal, volumes, marginal_volume):
    fractions = np.where(inside, 1.0, 0.0)
    marginal_total = volumes[marginal].sum()
    if marginal_total > 0:
        share = min(max(marginal_volume / marginal_total, 0.0), 1.0)
        fractions[marginal] = share
    return fractions


def clear(offers: Sequence[EnergyOffer], periods, price_cap=DEFAULT_PRICE_CAP) -> ClearingResult:
    """
    Computes the uniform market clearing price of each period and the accepted
    share of each offer. Marginal offers at the MCP are accepted pro-rata.

    :param offers: offers of every actor
    :param periods: number of periods T
    :param price_cap: highest admissible price
    :return: the clearing result; a period without offers gets price 0 and is flagged
    """
    if periods < 1:
        raise ValueError("At least one period is needed")
    offers = list(offers)
    for offer in offers:
        if offer.period > periods:
            raise ValueError("Offer {} is outside the {} periods".format(offer, periods))
        if offer.price > price_cap:
            raise ValueError("Offer {} is above the price cap {}".format(offer, price_cap))

    prices = np.zeros(periods)
    traded = np.zeros(periods)
    undefined = np.zeros(periods, dtype=bool)
    fractions = np.zeros(len(offers))
    period_of = np.array([offer.period for offer in offers], dtype=int)
    is_supply = np.array([offer.side == SUPPLY for offer in offers], dtype=bool)
    volumes = np.array([offer.volume for offer in offers], dtype=float)
    limit_prices = np.array([offer.price for offer in offers], dtype=float)

    for period in range(1, periods + 1):
        supply = np.flatnonzero((period_of == period) & is_supply)
        demand = np.flatnonzero((period_of == period) & ~is_supply)
        if not supply.size and not demand.size:
            undefined[period - 1] = True
            LOGGER.warning("No energy offer in period %d, MCP set to 0", period)
            continue
        price, volume, supply_fractions, demand_fractions = clear_period(
            limit_prices[supply], volumes[supply], limit_prices[demand], volumes[demand], price_cap
        )
        prices[period - 1] = price
        traded[period - 1] = volume
        fractions[supply] = supply_fractions
        fractions[demand] = demand_fractions

    LOGGER.info("Energy market cleared, mean MCP %.3f", prices.mean())
    return ClearingResult(offers, prices, fractions, traded, undefined)


def offers_to_frame(offers: Sequence[EnergyOffer]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            [offer.actor, offer.period, offer.side, offer.volume, offer.price, offer.unit]
            for offer in offers
        ],
        columns=OFFER_COLUMNS,
    )


def write_offers(offers: Sequence[EnergyOffer], path):
    offers_to_frame(offers).to_csv(path, index=False)


def read_offers(path) -> List[EnergyOffer]:
    frame = pd.read_csv(path, float_precision="round_trip", keep_default_na=False)
    return [
        EnergyOffer(
            str(row.actor),
            int(row.period),
            str(row.side),
            float(row.volume_mw),
            float(row.price_eur_mwh),
            str(getattr(row, "unit", "")),
        )
        for row in frame.itertuples(index=False)
    ]


def clearing_to_frame(result: ClearingResult) -> pd.DataFrame:
    return pd.DataFrame(
        [
            [offer.period, result.prices[offer.period - 1], index, result.fractions[index]]
            for index, offer in enumerate(result.offers)
        ],
        columns=CLEARING_COLUMNS,
    )


def write_clearing(result: ClearingResult, path):
    clearing_to_frame(result).to_csv(path, index=False)
