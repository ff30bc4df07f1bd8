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
:organization: CS GROUP - France
:copyright: 2021 CS GROUP - France. All rights reserved.
:license: see LICENSE file.
"""

import logging
import math
import unittest

import numpy as np

from flexmarket.agents.coverage import coverage_trial, random_tank_load, verify_scenario_coverage
from flexmarket.agents.forecaster import ForecastSettings, exponential_mean, forecast
from flexmarket.agents.portfolios import (
    PRODUCER,
    RETAILER,
    PriceForecast,
    ProducerPortfolio,
    ProductionUnit,
    RetailerPortfolio,
    TankLoad,
    Thresholds,
    learn_thresholds,
)
from flexmarket.agents.producer import (
    IMBALANCE_UNIT,
    POST_ENERGY,
    POST_RESERVE,
    producer_optimize,
    producer_to_offers,
)
from flexmarket.agents.retailer import (
    bid_grid,
    modulation_bids,
    retailer_day_ahead,
    retailer_offers,
    retailer_reposition,
    retailer_with_modulation,
    scenario_demand,
)
from flexmarket.exceptions import ConfigurationError
from flexmarket.markets.energy_market import DEMAND
from flexmarket.markets.reserve_market import DOWN, UP


def tank(periods, power_max, energy_max, total, initial, losses=0.0, name="load"):
    return TankLoad(
        name,
        power_min=0.0,
        power_max=np.asarray(power_max, dtype=float) * np.ones(periods),
        energy_min=0.0,
        energy_max=energy_max,
        efficiency=1.0,
        losses=losses,
        total_min=total,
        total_max=total,
        initial_energy=initial,
    )


def modulated_load():
    """A load whose only schedule able to offer 2 MW of modulation is 2 MW flat"""
    return tank(4, 4.0, 8.0, 8.0, 4.0, losses=2.0)


def unit(periods, capacity=100.0, cost=40.0, ramp=1000.0, initial_output=None):
    return ProductionUnit(
        "unit", 0.0, np.full(periods, capacity), ramp, ramp, cost, initial_output=initial_output
    )


class TestForecast(unittest.TestCase):
    def test_initial_values_without_history(self):
        result = forecast([], [], [], 3, ForecastSettings())
        np.testing.assert_allclose(result.energy, [52.5] * 3)
        np.testing.assert_allclose(result.imbalance_plus, [50.0] * 3)
        self.assertFalse(result.cap_observed.any())

    def test_exponential_weights(self):
        mean = exponential_mean([[10.0], [20.0]], [[False], [False]], 24, 0.5, 0.0)
        self.assertAlmostEqual(mean[0], 50.0 / 3.0)
        mean = exponential_mean([[100.0], [10.0], [20.0]], np.zeros((3, 1)), 2, 0.5, 0.0)
        self.assertAlmostEqual(mean[0], 50.0 / 3.0)
        self.assertEqual(exponential_mean([[7.0]], [[True]], 24, 0.5, 3.0)[0], 3.0)

    def test_capped_prices_replaced_by_last_valid(self):
        result = forecast([[10.0], [3000.0], [20.0]], [[40.0]] * 3, [[40.0]] * 3, 1, ForecastSettings())
        self.assertAlmostEqual(result.energy[0], 27.5 / 1.75)
        self.assertFalse(result.cap_observed[0])
        result = forecast([[10.0], [3000.0]], [[40.0]] * 2, [[40.0]] * 2, 1, ForecastSettings())
        self.assertAlmostEqual(result.energy[0], 10.0)
        self.assertTrue(result.cap_observed[0])

    def test_extreme_tariffs_ignored(self):
        result = forecast([[50.0]] * 2, [[0.0], [500.0]], [[30.0], [0.0]], 1, ForecastSettings())
        self.assertEqual(result.imbalance_plus[0], 50.0)
        self.assertTrue(result.plus_extreme[0])
        self.assertEqual(result.imbalance_minus[0], 30.0)
        self.assertTrue(result.minus_extreme[0])

    def test_invalid_settings(self):
        with self.assertRaises(ValueError):
            ForecastSettings(decay=1.0)
        with self.assertRaises(ValueError):
            ForecastSettings(window=0)


class TestThresholdLearning(unittest.TestCase):
    def learn(self, thresholds, submitted, prices, minus=(0.0, 0.0), tariff_minus=(50.0, 50.0)):
        return learn_thresholds(
            thresholds, submitted, [0.0, 0.0], minus, prices, [50.0, 50.0], tariff_minus, 3000.0, 500.0
        )

    def test_retailer_learns_demand_cap(self):
        learned = self.learn(Thresholds.initial(RETAILER, 2), [100.0, 100.0], [3000.0, 50.0])
        self.assertAlmostEqual(learned.market[0], 95.0)
        self.assertTrue(math.isinf(learned.market[1]))

    def test_producer_learns_minimum_offer(self):
        learned = self.learn(Thresholds.initial(PRODUCER, 2), [95.0, 100.0], [3000.0, 50.0])
        np.testing.assert_allclose(learned.market, [100.0, 0.0])

    def test_extreme_tariff_limits_imbalance(self):
        learned = self.learn(
            Thresholds.initial(RETAILER, 2), [10.0, 10.0], [50.0, 50.0], minus=[10.0, 0.0], tariff_minus=[500.0, 500.0]
        )
        self.assertAlmostEqual(learned.imbalance_minus[0], 9.5)
        self.assertTrue(math.isinf(learned.imbalance_minus[1]))
        self.assertTrue(np.isinf(learned.imbalance_plus).all())

    def test_thresholds_forgotten_after_memory(self):
        thresholds = self.learn(Thresholds.initial(RETAILER, 2), [100.0, 100.0], [3000.0, 50.0])
        for _ in range(9):
            thresholds = self.learn(thresholds, [100.0, 100.0], [50.0, 50.0])
        self.assertAlmostEqual(thresholds.market[0], 95.0)
        thresholds = self.learn(thresholds, [100.0, 100.0], [50.0, 50.0])
        self.assertTrue(math.isinf(thresholds.market[0]))


class TestRetailer(unittest.TestCase):
    def test_inelastic_demand_bought(self):
        portfolio = RetailerPortfolio("r", [10.0, 20.0])
        position = retailer_day_ahead(portfolio, PriceForecast.flat(2, 50.0, 100.0))
        np.testing.assert_allclose(position.energy, [10.0, 20.0], atol=1e-9)
        np.testing.assert_allclose(position.net_imbalance, [0.0, 0.0], atol=1e-9)
        self.assertAlmostEqual(position.objective, 1500.0)
        offers = retailer_offers(position, 3000.0)
        self.assertEqual([(o.period, o.side, o.price) for o in offers], [(1, DEMAND, 3000.0), (2, DEMAND, 3000.0)])

    def test_cheap_deficit_is_limited(self):
        portfolio = RetailerPortfolio("r", [10.0, 20.0])
        position = retailer_day_ahead(portfolio, PriceForecast.flat(2, 50.0, 100.0, 20.0))
        np.testing.assert_allclose(position.imbalance_minus, [1.0, 2.0], atol=1e-9)
        np.testing.assert_allclose(position.energy, [9.0, 18.0], atol=1e-9)

    def test_learned_cap_limits_demand(self):
        portfolio = RetailerPortfolio("r", [10.0, 10.0])
        portfolio.thresholds.market = np.array([5.0, math.inf])
        position = retailer_day_ahead(portfolio, PriceForecast.flat(2, 50.0, 100.0))
        np.testing.assert_allclose(position.energy, [9.0, 10.0], atol=1e-9)
        np.testing.assert_allclose(position.imbalance_minus, [1.0, 0.0], atol=1e-9)

    def test_consumption_shifted_to_cheap_period(self):
        portfolio = RetailerPortfolio("r", [0.0, 0.0], [tank(2, 10.0, 100.0, 10.0, 0.0)])
        forecast = PriceForecast.flat(2, [30.0, 60.0], 100.0)
        position = retailer_day_ahead(portfolio, forecast)
        np.testing.assert_allclose(position.schedules["load"], [10.0, 0.0], atol=1e-9)
        np.testing.assert_allclose(position.energy, [10.0, 0.0], atol=1e-9)
        self.assertAlmostEqual(position.objective, 300.0)

    def test_reposition_moves_imbalance(self):
        portfolio = RetailerPortfolio("r", [0.0, 0.0], [tank(2, [10.0, 7.0], 100.0, 10.0, 0.0)])
        position = retailer_reposition(portfolio, PriceForecast.flat(2, 50.0, 100.0), [0.0, 10.0])
        self.assertEqual(position.stage, "reposition")
        np.testing.assert_allclose(position.energy, [0.0, 10.0])
        np.testing.assert_allclose(position.schedules["load"], [3.0, 7.0], atol=1e-9)
        np.testing.assert_allclose(position.imbalance_minus, [3.0, 0.0], atol=1e-9)
        np.testing.assert_allclose(position.imbalance_plus, [0.0, 3.0], atol=1e-9)

    def test_infeasible_load(self):
        portfolio = RetailerPortfolio("r", [0.0, 0.0], [tank(2, 1.0, 100.0, 10.0, 0.0)])
        with self.assertRaises(ConfigurationError):
            retailer_day_ahead(portfolio, PriceForecast.flat(2, 50.0, 100.0))

    def test_modulation_amplitude_and_scenarios(self):
        load = modulated_load()
        portfolio = RetailerPortfolio("r", np.zeros(4), [load])
        position = retailer_with_modulation(portfolio, PriceForecast.flat(4, 50.0, 100.0), bid_grid(4, 4))
        self.assertEqual(position.stage, "day_ahead")
        self.assertEqual(len(position.modulation), 1)
        bid = position.modulation[0]
        self.assertEqual((bid.start, bid.length, bid.efficiency), (1, 4, 0.5))
        self.assertAlmostEqual(bid.amplitude, 2.0)
        np.testing.assert_allclose(position.schedules["load"], [2.0] * 4, atol=1e-9)
        np.testing.assert_allclose(position.scenario_up["load"], [4.0, 4.0, 0.0, 0.0], atol=1e-9)
        np.testing.assert_allclose(position.scenario_down["load"], [0.0, 0.0, 4.0, 4.0], atol=1e-9)
        np.testing.assert_allclose(scenario_demand(portfolio, position, "up"), [4.0, 4.0, 0.0, 0.0], atol=1e-9)
        self.assertEqual(modulation_bids(position), [bid])

    def test_contracted_amplitude_is_kept(self):
        portfolio = RetailerPortfolio("r", np.zeros(4), [modulated_load()])
        position = retailer_with_modulation(
            portfolio, PriceForecast.flat(4, 50.0, 100.0), [(1, 4)], demand=[2.0] * 4, amplitudes=[1.0]
        )
        self.assertEqual(position.stage, "reposition")
        self.assertAlmostEqual(position.modulation[0].amplitude, 1.0)

    def test_no_load_no_modulation(self):
        portfolio = RetailerPortfolio("r", [5.0, 5.0, 5.0, 5.0])
        position = retailer_with_modulation(portfolio, PriceForecast.flat(4, 50.0, 100.0), [(1, 2), (3, 2)])
        self.assertEqual([bid.amplitude for bid in position.modulation], [0.0, 0.0])
        self.assertEqual(modulation_bids(position), [])

    def test_bid_grid(self):
        self.assertEqual(bid_grid(10, 4), [(1, 4), (5, 4)])
        self.assertEqual(len(bid_grid(24, 4)), 6)
        with self.assertRaises(ConfigurationError):
            bid_grid(24, 3)


class TestProducer(unittest.TestCase):
    def test_cheap_unit_sells_everything(self):
        portfolio = ProducerPortfolio("p", [unit(2)])
        forecast = PriceForecast.flat(2, 50.0, 100.0)
        position = producer_optimize(portfolio, forecast)
        np.testing.assert_allclose(position.energy, [100.0, 100.0], atol=1e-9)
        np.testing.assert_allclose(position.reserve_up, [0.0, 0.0], atol=1e-9)
        np.testing.assert_allclose(position.reserve_down, [100.0, 100.0], atol=1e-9)
        self.assertAlmostEqual(position.objective, 2 * 1000.5)
        offers = producer_to_offers(position, portfolio, forecast)
        self.assertEqual([o.price for o in offers.energy], [40.0, 40.0])
        np.testing.assert_allclose([o.volume for o in offers.energy], [100.0, 100.0])
        self.assertEqual({bid.direction for bid in offers.reserve}, {DOWN})

    def test_expensive_unit_offers_reserve_only(self):
        portfolio = ProducerPortfolio("p", [unit(2, cost=60.0)])
        position = producer_optimize(portfolio, PriceForecast.flat(2, 50.0, 100.0))
        np.testing.assert_allclose(position.energy, [0.0, 0.0], atol=1e-9)
        np.testing.assert_allclose(position.reserve_up, [100.0, 100.0], atol=1e-9)

    def test_ramps_bound_output_and_reserve(self):
        portfolio = ProducerPortfolio("p", [unit(3, ramp=30.0, initial_output=0.0)])
        position = producer_optimize(portfolio, PriceForecast.flat(3, 50.0, 100.0))
        np.testing.assert_allclose(position.schedules["unit"], [30.0, 60.0, 90.0], atol=1e-9)
        np.testing.assert_allclose(position.reserve_down, [30.0, 60.0, 60.0], atol=1e-9)

    def test_learned_minimum_offer(self):
        portfolio = ProducerPortfolio("p", [unit(2, cost=60.0)])
        portfolio.thresholds.market = np.array([60.0, 0.0])
        position = producer_optimize(portfolio, PriceForecast.flat(2, 50.0, 100.0))
        np.testing.assert_allclose(position.energy, [60.0, 0.0], atol=1e-9)

    def test_cleared_energy_is_kept(self):
        portfolio = ProducerPortfolio("p", [unit(2)])
        position = producer_optimize(
            portfolio, PriceForecast.flat(2, 50.0, 100.0), POST_ENERGY, energy=[50.0, 50.0]
        )
        np.testing.assert_allclose(position.energy, [50.0, 50.0])
        np.testing.assert_allclose(position.schedules["unit"], [50.0, 50.0], atol=1e-9)
        np.testing.assert_allclose(position.reserve_up, [50.0, 50.0], atol=1e-9)

    def test_contracted_reserve_creates_deficit(self):
        portfolio = ProducerPortfolio("p", [unit(2)])
        forecast = PriceForecast.flat(2, 50.0, 100.0)
        position = producer_optimize(
            portfolio,
            forecast,
            POST_RESERVE,
            energy=[100.0, 100.0],
            unit_up={"unit": np.array([20.0, 20.0])},
            unit_down={"unit": np.array([10.0, 10.0])},
        )
        np.testing.assert_allclose(position.imbalance_minus, [20.0, 20.0], atol=1e-9)
        np.testing.assert_allclose(position.reserve_up, [20.0, 20.0])
        offers = producer_to_offers(position, portfolio, forecast)
        deficit = [offer for offer in offers.energy if offer.unit == IMBALANCE_UNIT]
        self.assertEqual(len(deficit), 2)
        self.assertEqual(deficit[0].price, 100.0)
        self.assertAlmostEqual(deficit[0].volume, 20.0)
        self.assertEqual({bid.direction for bid in offers.reserve}, {UP, DOWN})

    def test_missing_inputs(self):
        portfolio = ProducerPortfolio("p", [unit(2)])
        forecast = PriceForecast.flat(2, 50.0, 100.0)
        with self.assertRaises(ConfigurationError):
            producer_optimize(portfolio, forecast, POST_ENERGY)
        with self.assertRaises(ConfigurationError):
            producer_optimize(portfolio, forecast, POST_RESERVE, energy=[1.0, 1.0])
        with self.assertRaises(ConfigurationError):
            producer_optimize(portfolio, forecast, "intraday")


class TestScenarioCoverage(unittest.TestCase):
    def test_planned_scenarios_cover_activation(self):
        report = verify_scenario_coverage(
            modulated_load(), [2.0] * 4, [4.0, 4.0, 0.0, 0.0], [0.0, 0.0, 4.0, 4.0], 1, 4, samples=200
        )
        self.assertTrue(report.passed)
        self.assertEqual(report.samples, 200)
        self.assertIsNone(report.counterexample)

    def test_inconsistent_scenarios_rejected(self):
        load = modulated_load()
        with self.assertRaises(ValueError):
            verify_scenario_coverage(load, [2.0] * 4, [1.0, 4.0, 0.0, 3.0], [0.0, 0.0, 4.0, 4.0], 1, 4)
        with self.assertRaises(ValueError):
            verify_scenario_coverage(load, [2.0] * 4, [4.0, 4.0, 0.0, 1.0], [0.0, 0.0, 4.0, 4.0], 1, 4)
        narrow = tank(4, 4.0, 7.0, 8.0, 4.0, losses=2.0)
        with self.assertRaises(ValueError):
            verify_scenario_coverage(narrow, [2.0] * 4, [4.0, 4.0, 0.0, 0.0], [0.0, 0.0, 4.0, 4.0], 1, 4)

    def test_random_trials(self):
        rng = np.random.default_rng(3)
        for _ in range(3):
            report = coverage_trial(rng, periods=6, samples=100)
            self.assertTrue(report.passed, report.message)
        with self.assertRaises(ValueError):
            coverage_trial(rng, periods=5)

    def test_random_load_is_feasible_at_mean_power(self):
        load = random_tank_load(np.random.default_rng(5), 8)
        mean = load.losses[0] / load.efficiency
        self.assertLessEqual(load.max_violation(np.full(8, mean)), 1e-9)


if __name__ == "__main__":
    logging.basicConfig(filename="test_agents.log", level=logging.INFO)
    unittest.main()
