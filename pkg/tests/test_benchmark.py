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
import os
import tempfile
import unittest
from pathlib import Path

from flexmarket import flexmarket_module
from flexmarket.simulation.config import CLOSED, OPEN, load_config
from flexmarket.simulation.simulator import CYCLE

# full size runs take minutes
LONG_RUNS = os.environ.get("FLEXMARKET_BENCHMARK") == "1"


class TestCoverageProperty(unittest.TestCase):
    def test_random_loads(self):
        reports = flexmarket_module.verify(loads=20, samples=1000, seed=0)
        self.assertEqual(sum(report.failures for report in reports), 0)


@unittest.skipUnless(LONG_RUNS, "set FLEXMARKET_BENCHMARK=1 to run the full size market")
class TestBenchmark(unittest.TestCase):
    def test_closed_market_cycle(self):
        outcome = flexmarket_module.run(load_config())
        self.assertEqual(outcome.termination, CYCLE)
        self.assertGreaterEqual(outcome.summary["mean_mcp"], 45.0)
        self.assertLessEqual(outcome.summary["mean_mcp"], 60.0)
        self.assertAlmostEqual(outcome.summary["non_contracted_mwh"], 0.0, places=6)
        self.assertAlmostEqual(outcome.summary["retailer_imbalance_mwh"], 0.0, places=6)

    def test_identical_metric_files(self):
        with tempfile.TemporaryDirectory() as directory:
            first = Path(directory) / "first"
            second = Path(directory) / "second"
            flexmarket_module.run(load_config(), first)
            flexmarket_module.replay(first / "manifest.txt", second)
            self.assertEqual((first / "metrics.csv").read_bytes(), (second / "metrics.csv").read_bytes())

    def test_open_market_sweep(self):
        rates = flexmarket_module.DEFAULT_RATES
        frame = flexmarket_module.sweep(rates, load_config(), jobs=min(4, os.cpu_count() or 1))
        self.assertFalse((frame["termination"] == "failed").any())
        closed = frame[frame["setting"] == CLOSED].set_index("rate")
        opened = frame[frame["setting"] == OPEN].set_index("rate")
        self.assertLessEqual(opened.loc[max(rates), "procurement_cost"], 0.3 * opened.loc[0.0, "procurement_cost"])
        for rate in rates:
            self.assertLessEqual(abs(opened.loc[rate, "mean_mcp"] - closed.loc[rate, "mean_mcp"]), 1.0)
        trend = flexmarket_module.sweep_trends(frame).set_index("setting").loc[OPEN]
        self.assertEqual(trend["cells"], len(rates))
        # a constant series is non-decreasing but has no rank correlation
        if opened["non_contracted_mwh"].nunique() > 1:
            self.assertGreater(trend["non_contracted_trend"], 0.0)


if __name__ == "__main__":
    logging.basicConfig(filename="test_benchmark.log", level=logging.INFO)
    unittest.main()
