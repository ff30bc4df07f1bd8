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
Checks that the two extreme scenarios of a modulation bid cover every
activation scheme: any schedule lying between them half by half, and
consuming the same energy over the bid, must be feasible for the load.

:organization: CS GROUP - France
:copyright: 2021 CS GROUP - France. All rights reserved.
:license: see LICENSE file.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from flexmarket.agents.portfolios import AgentSettings, PriceForecast, RetailerPortfolio, TankLoad
from flexmarket.agents.retailer import retailer_with_modulation

LOGGER = logging.getLogger("dev_logger")

FEASIBILITY_TOLERANCE = 1e-6


@dataclass
class CoverageReport:
    samples: int
    failures: int
    counterexample: Optional[np.ndarray] = None
    message: str = ""

    @property
    def passed(self):
        return self.failures == 0


def _energy_before(load: TankLoad, baseline, start):
    if start == 0:
        return load.initial_energy
    return float(load.trajectory(baseline[:start])[-1])


def schedule_violation(load: TankLoad, schedule, baseline, start):
    """
    Largest violation of the power bounds, energy bounds and final energy of a
    schedule replacing the baseline from the 0-based period ``start``

    :return: (violation, description of the worst constraint)
    """
    schedule = np.asarray(schedule, dtype=float)
    stop = start + len(schedule)
    initial = _energy_before(load, baseline, start)
    energy = load.trajectory(schedule, start, initial)
    target = load.trajectory(baseline[start:stop], start, initial)[-1]
    lower = np.array([load.energy_bounds_after(t)[0] for t in range(start, stop)])
    upper = np.array([load.energy_bounds_after(t)[1] for t in range(start, stop)])
    checks = {
        "power below minimum": load.power_min[start:stop] - schedule,
        "power above maximum": schedule - load.power_max[start:stop],
        "energy below minimum": lower - energy,
        "energy above maximum": energy - upper,
        "final energy differs from the baseline": np.array([abs(energy[-1] - target)]),
    }
    worst = max(checks, key=lambda key: checks[key].max())
    return max(0.0, float(checks[worst].max())), worst


def verify_scenario_coverage(
    load: TankLoad, baseline, scenario_up, scenario_down, start, length, samples=1000, seed=0
) -> CoverageReport:
    """
    Draws random schedules between the scenarios of a modulation bid and checks
    each of them against the tank constraints.

    :param baseline: full schedule d of the load
    :param scenario_up: full schedule d-bar, above the baseline in the first half
    :param scenario_down: full schedule d-underbar, mirror of d-bar
    :param start: first period of the bid, starting at 1
    :param length: number of periods of the bid
    :param samples: number of random schedules
    :param seed: seed of the generator
    :raises ValueError: when the inputs break the envelope or are infeasible
    """
    baseline = np.asarray(baseline, dtype=float)
    first = start - 1
    window = slice(first, first + length)
    base = baseline[window]
    high_first = np.asarray(scenario_up, dtype=float)[window]
    low_first = np.asarray(scenario_down, dtype=float)[window]
    half = length // 2
    ordered = np.concatenate(
        [
            (low_first[:half] <= base[:half] + FEASIBILITY_TOLERANCE)
            & (base[:half] <= high_first[:half] + FEASIBILITY_TOLERANCE),
            (high_first[half:] <= base[half:] + FEASIBILITY_TOLERANCE)
            & (base[half:] <= low_first[half:] + FEASIBILITY_TOLERANCE),
        ]
    )
    if not ordered.all():
        raise ValueError("Scenarios do not enclose the baseline of load {}".format(load.name))
    total = base.sum()
    for label, scenario in (("up", high_first), ("down", low_first)):
        if abs(scenario.sum() - total) > FEASIBILITY_TOLERANCE:
            raise ValueError("Scenario {} of load {} does not consume the baseline energy".format(label, load.name))
        violation, reason = schedule_violation(load, scenario, baseline, first)
        if violation > FEASIBILITY_TOLERANCE:
            raise ValueError("Scenario {} of load {} is infeasible: {}".format(label, load.name, reason))
    if load.max_violation(baseline) > FEASIBILITY_TOLERANCE:
        raise ValueError("Baseline of load {} is infeasible".format(load.name))

    lower = np.minimum(high_first, low_first)
    upper = np.maximum(high_first, low_first)
    rng = np.random.default_rng(seed)
    report = CoverageReport(samples, 0)
    for _ in range(samples):
        sample = rng.uniform(lower, upper)
        gap = total - sample.sum()
        # spread the missing energy over the headroom left in its direction
        room = upper - sample if gap > 0 else sample - lower
        if room.sum() > 0:
            sample = sample + np.sign(gap) * room * min(abs(gap) / room.sum(), 1.0)
        violation, reason = schedule_violation(load, sample, baseline, first)
        if violation > FEASIBILITY_TOLERANCE:
            report.failures += 1
            if report.counterexample is None:
                report.counterexample = sample
                report.message = "{} by {:.3g}".format(reason, violation)
    LOGGER.debug("Coverage of load %s: %d failures over %d samples", load.name, report.failures, samples)
    return report


def random_tank_load(rng: np.random.Generator, periods, name="load", period_hours=1.0) -> TankLoad:
    """A random tank load that can always keep its level by consuming its mean power"""
    mean = rng.uniform(1.0, 5.0)
    efficiency = rng.uniform(0.8, 1.0)
    capacity = mean * rng.uniform(3.0, 6.0)
    spread = rng.uniform(0.5, 1.0)
    return TankLoad(
        name,
        power_min=0.0,
        power_max=mean * rng.uniform(1.5, 2.5),
        energy_min=0.0,
        energy_max=capacity,
        efficiency=efficiency,
        losses=efficiency * mean * period_hours,
        total_min=(1.0 - spread * 0.5) * periods * mean * period_hours,
        total_max=(1.0 + spread * 0.5) * periods * mean * period_hours,
        initial_energy=capacity / 2.0,
        period_hours=period_hours,
    )


def coverage_trial(rng: np.random.Generator, periods=8, samples=1000, seed=0, settings=None) -> CoverageReport:
    """
    Plans one modulation bid over the whole horizon for a random load at random
    prices, then checks the resulting scenarios
    """
    if periods % 2:
        raise ValueError("The horizon of a coverage trial must be even, got {}".format(periods))
    settings = settings or AgentSettings()
    load = random_tank_load(rng, periods)
    portfolio = RetailerPortfolio("coverage", np.zeros(periods), [load])
    forecast = PriceForecast.flat(periods, rng.uniform(40.0, 60.0, periods), 400.0)
    position = retailer_with_modulation(portfolio, forecast, [(1, periods)], settings)
    return verify_scenario_coverage(
        load,
        position.schedules[load.name],
        position.scenario_up[load.name],
        position.scenario_down[load.name],
        1,
        periods,
        samples,
        seed,
    )
