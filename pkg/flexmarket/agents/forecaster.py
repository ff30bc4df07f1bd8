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
Price forecasting shared by every actor: exponential mean of the last rounds

:organization: CS GROUP - France
:copyright: 2021 CS GROUP - France. All rights reserved.
:license: see LICENSE file.
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from flexmarket.agents.portfolios import PRICE_TOLERANCE, PriceForecast

LOGGER = logging.getLogger("dev_logger")


@dataclass(frozen=True)
class ForecastSettings:
    """
    :param window: number of past rounds T_w taken into account
    :param decay: weight ratio between a round and the next one, in [0, 1)
    :param initial_energy: forecast of pi^E before any usable observation
    :param initial_imbalance: forecast of the tariffs before any usable observation
    """

    window: int = 24
    decay: float = 0.5
    price_cap: float = 3000.0
    non_contracted_price: float = 500.0
    initial_energy: float = 52.5
    initial_imbalance: float = 50.0

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("Forecast window must be at least 1, got {}".format(self.window))
        if not 0 <= self.decay < 1:
            raise ValueError("Forecast decay must lie in [0, 1), got {}".format(self.decay))


def exponential_mean(history, invalid, window, decay, initial):
    """
    Exponential mean of each column over the last rows of a history.

    Invalid observations are replaced by the last valid one of their column
    (possibly older than the window); columns without any valid observation
    get the initial value.

    :param history: rounds x periods array
    :param invalid: mask of the same shape
    :param window: number of last rounds used
    :param decay: weight of a round relative to the next one
    :param initial: fallback value
    :rtype: numpy.ndarray
    """
    frame = pd.DataFrame(np.asarray(history, dtype=float))
    if frame.empty:
        return np.full(frame.shape[1], float(initial))
    frame = frame.mask(np.asarray(invalid, dtype=bool)).ffill().tail(window)
    means = frame.ewm(alpha=1.0 - decay, adjust=True).mean().iloc[-1]
    return means.fillna(float(initial)).to_numpy()


def _empty_history(history, periods):
    history = np.asarray(history, dtype=float)
    if history.size == 0:
        return np.zeros((0, periods))
    return history.reshape(-1, periods)


def forecast(energy_history, plus_history, minus_history, periods, settings: ForecastSettings) -> PriceForecast:
    """
    Forecasts the prices of the next round.

    Energy prices at the cap are replaced by the last non-capped one, tariffs
    equal to 0 or pi^nc by the last one which is neither. The flags report
    whether the last round hit those values.

    :param energy_history: past pi^E, one row per round
    :param plus_history: past pi^{I+}
    :param minus_history: past pi^{I-}
    :param periods: number of periods T
    :param settings: forecast parameters
    :rtype: PriceForecast
    """
    energy_history = _empty_history(energy_history, periods)
    plus_history = _empty_history(plus_history, periods)
    minus_history = _empty_history(minus_history, periods)

    capped = energy_history >= settings.price_cap - PRICE_TOLERANCE
    plus_extreme = (plus_history <= PRICE_TOLERANCE) | (
        plus_history >= settings.non_contracted_price - PRICE_TOLERANCE
    )
    minus_extreme = (minus_history <= PRICE_TOLERANCE) | (
        minus_history >= settings.non_contracted_price - PRICE_TOLERANCE
    )

    energy = exponential_mean(energy_history, capped, settings.window, settings.decay, settings.initial_energy)
    plus = exponential_mean(
        plus_history, plus_extreme, settings.window, settings.decay, settings.initial_imbalance
    )
    minus = exponential_mean(
        minus_history, minus_extreme, settings.window, settings.decay, settings.initial_imbalance
    )
    ceiling = max(settings.price_cap, settings.non_contracted_price)

    def last(flags):
        return flags[-1].copy() if len(flags) else np.zeros(periods, dtype=bool)

    LOGGER.debug("Energy forecast: mean %.3f over %d rounds", energy.mean(), len(energy_history))
    return PriceForecast(
        np.clip(energy, 0.0, ceiling),
        np.clip(plus, 0.0, ceiling),
        np.clip(minus, 0.0, ceiling),
        last(capped),
        last(plus_extreme),
        last(minus_extreme),
    )
