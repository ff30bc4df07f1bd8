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
import tempfile
import unittest
from pathlib import Path

import numpy as np

from flexmarket.optim.lp_core import (
    EQ,
    GE,
    INF,
    INFEASIBLE,
    LE,
    OPTIMAL,
    UNBOUNDED,
    LinearProgram,
    SolverOptions,
    solve,
)
from tests.oracles import lp_vertex_oracle


def random_lp(rng):
    """A feasible LP with finite bounds around a random interior point"""
    n = int(rng.integers(2, 6))
    m = int(rng.integers(1, 6))
    lp = LinearProgram("random", "min")
    lower = np.where(rng.random(n) < 0.3, -3.0, 0.0)
    upper = np.full(n, 10.0)
    point = rng.uniform(lower, upper)
    for j in range(n):
        lp.add_variable("x{}".format(j), lower[j], upper[j], float(rng.integers(-5, 6)))
    equality_used = False
    for _ in range(m):
        row = np.zeros(n)
        while not row.any():
            row = rng.integers(-5, 6, n).astype(float)
        activity = float(row @ point)
        choice = rng.random()
        if choice < 0.2 and not equality_used:
            equality_used = True
            lp.add_constraint(enumerate(row), EQ, activity)
        elif choice < 0.6:
            lp.add_constraint(enumerate(row), LE, activity + rng.uniform(0.0, 3.0))
        else:
            lp.add_constraint(enumerate(row), GE, activity - rng.uniform(0.0, 3.0))
    return lp


class TestLinearProgram(unittest.TestCase):
    def test_bound_attained(self):
        lp = LinearProgram("bound", "max")
        lp.add_variable("x", 0.0, 5.0, 1.0)
        solution = solve(lp)
        self.assertEqual(solution.status, OPTIMAL)
        self.assertAlmostEqual(solution.objective, 5.0)
        self.assertAlmostEqual(solution["x"], 5.0)

    def test_tight_constraint(self):
        lp = LinearProgram("tight")
        x = lp.add_variable("x", cost=1.0)
        y = lp.add_variable("y", cost=1.0)
        lp.add_constraint({x: 1.0, y: 1.0}, GE, 3.0)
        solution = solve(lp)
        self.assertTrue(solution.is_optimal)
        self.assertAlmostEqual(solution.objective, 3.0)

    def test_infeasible_is_a_status(self):
        lp = LinearProgram("infeasible")
        x = lp.add_variable("x", cost=1.0)
        lp.add_constraint({x: 1.0}, LE, -1.0)
        solution = solve(lp)
        self.assertEqual(solution.status, INFEASIBLE)
        self.assertTrue(math.isnan(solution.objective))
        self.assertTrue(np.isnan(solution.values).all())

    def test_unbounded_is_a_status(self):
        lp = LinearProgram("unbounded", "max")
        x = lp.add_variable("x", cost=1.0)
        y = lp.add_variable("y")
        lp.add_constraint({x: 1.0, y: -1.0}, LE, 2.0)
        self.assertEqual(solve(lp).status, UNBOUNDED)

    def test_free_variable_and_equality(self):
        lp = LinearProgram("free")
        x = lp.add_variable("x", -INF, INF, 1.0)
        y = lp.add_variable("y", -1.0, INF)
        lp.add_constraint({x: 1.0, y: -1.0}, EQ, 2.0)
        solution = solve(lp)
        self.assertAlmostEqual(solution["x"], 1.0)
        self.assertAlmostEqual(solution["y"], -1.0)

    def test_degenerate_program_does_not_cycle(self):
        # a classic cycling example for Dantzig's rule with lexicographic ties
        lp = LinearProgram("degenerate")
        x4 = lp.add_variable("x4", cost=-0.75)
        x5 = lp.add_variable("x5", cost=20.0)
        x6 = lp.add_variable("x6", cost=-0.5)
        x7 = lp.add_variable("x7", cost=6.0)
        lp.add_constraint({x4: 0.25, x5: -8.0, x6: -1.0, x7: 9.0}, LE, 0.0)
        lp.add_constraint({x4: 0.5, x5: -12.0, x6: -0.5, x7: 3.0}, LE, 0.0)
        lp.add_constraint({x6: 1.0}, LE, 1.0)
        for options in (SolverOptions(), SolverOptions(bland_after=1)):
            solution = solve(lp, options)
            self.assertTrue(solution.is_optimal)
            self.assertAlmostEqual(solution.objective, -1.25)

    def test_random_programs_match_vertex_enumeration(self):
        rng = np.random.default_rng(2021)
        for _ in range(50):
            lp = random_lp(rng)
            cost, matrix, relations, rhs, lower, upper = lp.to_matrices()
            expected = lp_vertex_oracle(cost, matrix, relations, rhs, lower, upper)
            self.assertIsNotNone(expected)
            solution = solve(lp)
            self.assertTrue(solution.is_optimal)
            self.assertLessEqual(abs(solution.objective - expected[0]), 1e-6 * max(1.0, abs(expected[0])))
            self.assertLessEqual(lp.max_violation(solution.values), 1e-7)

    def test_highs_backend_agrees(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            lp = random_lp(rng)
            simplex = solve(lp)
            highs = solve(lp, SolverOptions(method="highs"))
            self.assertEqual(highs.status, OPTIMAL)
            self.assertLessEqual(abs(simplex.objective - highs.objective), 1e-5 * max(1.0, abs(highs.objective)))

    def test_determinism(self):
        lp = random_lp(np.random.default_rng(3))
        first = solve(lp)
        second = solve(lp)
        self.assertEqual(first.objective, second.objective)
        np.testing.assert_array_equal(first.values, second.values)

    def test_duplicate_coefficients_are_summed(self):
        lp = LinearProgram()
        x = lp.add_variable("x")
        lp.add_constraint([(x, 1.0), ("x", 2.0)], LE, 6.0)
        self.assertEqual(lp.constraints[0].coefficients, {x: 3.0})
        with self.assertRaises(ValueError):
            lp.add_variable("x")
        with self.assertRaises(ValueError):
            lp.add_constraint({"y": 1.0}, LE, 1.0)

    def test_validate_rejects_inverted_bounds(self):
        lp = LinearProgram()
        lp.add_variable("x", 2.0, 1.0)
        with self.assertRaises(ValueError):
            lp.validate()

    def test_write_lp(self):
        lp = LinearProgram("dump")
        x = lp.add_variable("x", -INF, INF, 0.1)
        y = lp.add_variable("y", 0.0, 4.0, -1.0)
        lp.add_constraint({x: 1.0, y: 2.0}, GE, 1.5, "first")
        with tempfile.TemporaryDirectory() as directory:
            solve(lp, SolverOptions(dump_dir=directory))
            text = (Path(directory) / "dump.lp").read_text()
        self.assertIn("Minimize", text)
        self.assertIn(" obj: + 0.1 x - 1.0 y", text)
        self.assertIn(" first: + 1.0 x + 2.0 y >= 1.5", text)
        self.assertIn(" x free", text)
        self.assertIn(" 0.0 <= y <= 4.0", text)
        self.assertTrue(text.endswith("End\n"))


if __name__ == "__main__":
    logging.basicConfig(filename="test_lp_core.log", level=logging.INFO)
    unittest.main()
