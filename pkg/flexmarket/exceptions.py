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
Exceptions raised by FlexMarket

:organization: CS GROUP - France
:copyright: 2021 CS GROUP - France. All rights reserved.
:license: see LICENSE file.
"""


class ConfigurationError(ValueError):
    """Invalid configuration, portfolio data or agent model that has no feasible position"""


class SimulationError(RuntimeError):
    """A round of the simulation could not be completed"""

    def __init__(self, round_index, stage, actor, cause):
        self.round_index = round_index
        self.stage = stage
        self.actor = actor
        self.cause = cause
        super().__init__(
            "round {}, stage {}, actor {}: {}".format(round_index, stage, actor, cause)
        )


class LPSolverError(RuntimeError):
    """The simplex solver stopped without a status (iteration limit, singular basis)"""
