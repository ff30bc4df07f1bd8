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
import tempfile
import unittest
from pathlib import Path

import numpy as np

from flexmarket.markets.reserve_market import (
    DOWN,
    UP,
    ClassicalReserveBid,
    ModulationBid,
    ReservePrices,
    clear_reserve,
    over_contract_penalties,
    over_contract_penalty,
    read_classical_bids,
    read_modulation_bids,
    write_classical_bids,
    write_modulation_bids,
    write_procurement,
)
from tests.oracles import grid_minimum, random_reserve_bids

PRICES = ReservePrices()


class TestReserveMarket(unittest.TestCase):
    def test_cheapest_bids_first(self):
        bids = [ClassicalReserveBid("p1", 1, UP, 6.0, 20.0), ClassicalReserveBid("p2", 1, UP, 10.0, 30.0)]
        result = clear_reserve(bids, [], [10.0], [0.0], PRICES)
        np.testing.assert_allclose(result.classical_acceptance, [1.0, 0.4], atol=1e-9)
        self.assertAlmostEqual(result.capacity_cost, 45.0 * 10.0)
        self.assertAlmostEqual(result.procurement_cost, result.capacity_cost)
        self.assertAlmostEqual(result.objective, 65.0 * 6.0 + 75.0 * 4.0)
        np.testing.assert_allclose(result.short_up, [0.0], atol=1e-9)
        np.testing.assert_allclose(result.accepted_volume("p2", UP), [4.0])
        np.testing.assert_allclose(result.accepted_volume("p2", DOWN), [0.0])

    def test_missing_bids_become_non_contracted(self):
        result = clear_reserve([], [], [3.0, 0.0], [0.0, 2.0], PRICES)
        np.testing.assert_allclose(result.short_up, [3.0, 0.0])
        np.testing.assert_allclose(result.short_down, [0.0, 2.0])
        np.testing.assert_allclose(result.penalties, [550.0, 550.0])
        self.assertEqual(result.capacity_cost, 0.0)
        self.assertAlmostEqual(result.objective, 2500.0)

    def test_mix_matches_acceptance_grid(self):
        classical = [ClassicalReserveBid("p1", 1, UP, 10.0, 20.0)]
        modulation = [ModulationBid("r1", 1, 2, 20.0, 0.0, 0.5)]
        result = clear_reserve(classical, modulation, [10.0, 10.0], [0.0, 0.0], PRICES)
        penalty = result.penalties

        def cost(point):
            x_c, x_m = point
            total = (45.0 + 20.0) * 10.0 * x_c + 10.0 * 20.0 * x_m
            for t, covered_up in enumerate((10.0 * x_c + 10.0 * x_m, 10.0 * x_m)):
                total += 500.0 * max(10.0 - covered_up, 0.0) + penalty[t] * max(covered_up - 10.0, 0.0)
                total += penalty[t] * 10.0 * x_m
            return total

        grid = np.linspace(0.0, 1.0, 101)
        best, point = grid_minimum(cost, [grid, grid])
        self.assertAlmostEqual(result.objective, best, places=6)
        np.testing.assert_allclose(result.classical_acceptance, [point[0]], atol=1e-7)
        np.testing.assert_allclose(result.modulation_acceptance, [point[1]], atol=1e-7)

    def test_over_contracting_is_penalized(self):
        bid = ClassicalReserveBid("p1", 1, DOWN, 10.0, 100.0)
        result = clear_reserve([bid], [], [0.0], [5.0], PRICES)
        self.assertAlmostEqual(result.penalties[0], 110.0)
        self.assertAlmostEqual(result.classical_acceptance[0], 0.5, places=7)
        np.testing.assert_allclose(result.over_down, [0.0], atol=1e-7)

    def test_modulation_covers_both_directions(self):
        modulation = [ModulationBid("r1", 1, 2, 5.0, 0.0, 0.5)]
        classical = [
            ClassicalReserveBid("p1", period, direction, 2.5, 20.0)
            for period in (1, 2)
            for direction in (UP, DOWN)
        ]
        result = clear_reserve(classical, modulation, [2.5, 2.5], [2.5, 2.5], PRICES)
        np.testing.assert_allclose(result.modulation_acceptance, [1.0], atol=1e-9)
        np.testing.assert_allclose(result.classical_acceptance, np.zeros(4), atol=1e-9)
        self.assertAlmostEqual(result.capacity_cost, 50.0)
        amplitudes = result.contracted_amplitudes("r1")
        self.assertEqual(list(amplitudes), [1])
        self.assertAlmostEqual(amplitudes[1], 5.0)
        np.testing.assert_allclose(result.effective_volume(UP), [2.5, 2.5])
        np.testing.assert_allclose(result.effective_volume(DOWN), [2.5, 2.5])

    def test_modulation_volume_falls_with_its_price(self):
        rng = np.random.default_rng(29)
        periods = 4
        for _ in range(40):
            classical, modulation = random_reserve_bids(rng, periods)
            requirement_up = rng.uniform(0.0, 15.0, periods)
            requirement_down = rng.uniform(0.0, 15.0, periods)
            volumes = []
            for price in np.linspace(0.0, 100.0, 11):
                result = clear_reserve(
                    classical, modulation, requirement_up, requirement_down, ReservePrices(modulation=float(price))
                )
                volumes.append(sum(bid.amplitude * x for bid, x in zip(modulation, result.modulation_acceptance)))
            self.assertLessEqual(np.diff(volumes).max(), 1e-6)

    def test_penalty_fallbacks(self):
        self.assertEqual(over_contract_penalty([], 7.0), 7.0)
        self.assertAlmostEqual(over_contract_penalty([40.0, 55.0], 7.0), 60.5)
        self.assertAlmostEqual(over_contract_penalty([10.0, 30.0], 7.0), 33.0)
        modulation = [ModulationBid("r1", 1, 2, 1.0, 20.0)]
        classical = [ClassicalReserveBid("p1", 2, DOWN, 1.0, 40.0)]
        np.testing.assert_allclose(over_contract_penalties(classical, modulation, 2, PRICES), [44.0, 44.0])
        np.testing.assert_allclose(over_contract_penalties([], modulation, 2, PRICES), [22.0, 22.0])

    def test_invalid_bids(self):
        with self.assertRaises(ValueError):
            ModulationBid("r1", 1, 3, 1.0)
        with self.assertRaises(ValueError):
            ModulationBid("r1", 1, 2, -1.0)
        with self.assertRaises(ValueError):
            ClassicalReserveBid("p1", 1, "sideways", 1.0, 0.0)
        with self.assertRaises(ValueError):
            ClassicalReserveBid("p1", 1, UP, 1.0, 0.0, efficiency=1.5)
        overlapping = [ModulationBid("r1", 1, 2, 1.0), ModulationBid("r1", 2, 2, 1.0)]
        with self.assertRaises(ValueError):
            clear_reserve([], overlapping, [0.0] * 4, [0.0] * 4, PRICES)
        with self.assertRaises(ValueError):
            clear_reserve([], [ModulationBid("r1", 3, 2, 1.0)], [0.0] * 3, [0.0] * 3, PRICES)
        with self.assertRaises(ValueError):
            clear_reserve([], [], [1.0], [1.0, 1.0], PRICES)

    def test_csv_files(self):
        classical = [ClassicalReserveBid("p1", 1, UP, 2.5, 47.125, unit="slow_1")]
        modulation = [ModulationBid("r1", 1, 2, 0.1 + 0.2, 0.0, 0.5)]
        result = clear_reserve(classical, modulation, [1.0, 1.0], [1.0, 1.0], PRICES)
        with tempfile.TemporaryDirectory() as directory:
            write_classical_bids(classical, Path(directory) / "classical.csv")
            write_modulation_bids(modulation, Path(directory) / "modulation.csv")
            write_procurement(result, directory)
            self.assertEqual(read_classical_bids(Path(directory) / "classical.csv"), classical)
            self.assertEqual(read_modulation_bids(Path(directory) / "modulation.csv"), modulation)
            self.assertTrue((Path(directory) / "reserve_acceptance.csv").is_file())
            self.assertTrue((Path(directory) / "reserve_periods.csv").is_file())


if __name__ == "__main__":
    logging.basicConfig(filename="test_reserve_market.log", level=logging.INFO)
    unittest.main()
