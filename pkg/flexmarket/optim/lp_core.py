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
Linear programs and the dense bounded-variable simplex used by every market
clearing and every actor model.

Infinite bounds are written with ``math.inf``. A program is solved with
:func:`solve`, which returns a :class:`Solution` whose status is one of
``optimal``, ``infeasible`` or ``unbounded``.

:organization: CS GROUP - France
:copyright: 2021 CS GROUP - France. All rights reserved.
:license: see LICENSE file.
"""

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np
from scipy.optimize import linprog

from flexmarket.exceptions import LPSolverError

LOGGER = logging.getLogger("dev_logger")

INF = math.inf

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

LE = "<="
EQ = "="
GE = ">="
_RELATIONS = {"<=": LE, "=<": LE, "=": EQ, "==": EQ, ">=": GE, "=>": GE}

Key = Union[int, str]


@dataclass(frozen=True)
class Variable:
    """A decision variable with its (possibly infinite) bounds"""

    name: str
    lower: float = 0.0
    upper: float = INF


@dataclass(frozen=True)
class Constraint:
    """Sparse linear row: sum of coefficient * variable, relation, right-hand side"""

    coefficients: Dict[int, float]
    relation: str
    rhs: float
    name: str = ""


@dataclass(frozen=True)
class SolverOptions:
    """
    Tuning of :func:`solve`

    :param method: "simplex" (built-in) or "highs" (scipy)
    :param tol_feas: primal feasibility tolerance
    :param tol_pivot: smallest pivot magnitude accepted in the ratio test
    :param tol_opt: reduced cost tolerance
    :param bland_after: consecutive degenerate pivots before switching to Bland's rule
    :param refactor_every: pivots between two refactorizations of the basis
    :param max_iterations: iteration limit, derived from the size when None
    :param dump_dir: when set, every solved program is written there in LP format
    """

    method: str = "simplex"
    tol_feas: float = 1e-7
    tol_pivot: float = 1e-9
    tol_opt: float = 1e-9
    bland_after: int = 50
    refactor_every: int = 100
    max_iterations: Optional[int] = None
    dump_dir: Optional[str] = None


class LinearProgram:
    """
    A linear program in natural form: bounded variables, a linear objective to
    minimize or maximize and a list of sparse constraints.
    """

    def __init__(self, name="lp", sense="min"):
        if sense not in ("min", "max"):
            raise ValueError("Unknown objective sense: {}".format(sense))
        self.name = name
        self.sense = sense
        self.variables: List[Variable] = []
        self.constraints: List[Constraint] = []
        self.objective: Dict[int, float] = {}
        self._index: Dict[str, int] = {}

    @property
    def num_variables(self):
        return len(self.variables)

    @property
    def num_constraints(self):
        return len(self.constraints)

    def add_variable(self, name, lower=0.0, upper=INF, cost=0.0):
        """
        Declares a variable

        :param name: unique name of the variable
        :param lower: lower bound, may be -inf
        :param upper: upper bound, may be inf
        :param cost: objective coefficient
        :return: index of the variable
        :rtype: int
        """
        if name in self._index:
            raise ValueError("Variable declared twice: {}".format(name))
        index = len(self.variables)
        self.variables.append(Variable(name, float(lower), float(upper)))
        self._index[name] = index
        if cost:
            self.objective[index] = float(cost)
        return index

    def index(self, key: Key) -> int:
        """Index of a variable given by name or index"""
        if isinstance(key, str):
            try:
                return self._index[key]
            except KeyError as error:
                raise ValueError("Unknown variable: {}".format(key)) from error
        return int(key)

    def set_bounds(self, key: Key, lower, upper):
        index = self.index(key)
        self.variables[index] = replace(
            self.variables[index], lower=float(lower), upper=float(upper)
        )

    def fix(self, key: Key, value):
        """Fixes a variable to a value"""
        self.set_bounds(key, value, value)

    def add_cost(self, key: Key, coefficient):
        index = self.index(key)
        self.objective[index] = self.objective.get(index, 0.0) + float(coefficient)

    def add_constraint(
        self,
        coefficients: Union[Mapping[Key, float], Iterable[Tuple[Key, float]]],
        relation,
        rhs,
        name="",
    ):
        """
        Adds a constraint. Repeated variables have their coefficients summed.

        :param coefficients: mapping or pairs (variable, coefficient)
        :param relation: one of "<=", "=", ">="
        :param rhs: right-hand side
        :param name: optional name, used in LP dumps
        :return: index of the constraint
        :rtype: int
        """
        try:
            relation = _RELATIONS[relation]
        except KeyError as error:
            raise ValueError("Unknown relation: {}".format(relation)) from error
        pairs = coefficients.items() if isinstance(coefficients, Mapping) else coefficients
        row: Dict[int, float] = {}
        for key, value in pairs:
            index = self.index(key)
            row[index] = row.get(index, 0.0) + float(value)
        row = {index: value for index, value in row.items() if value != 0.0}
        self.constraints.append(
            Constraint(row, relation, float(rhs), name or "c{}".format(len(self.constraints)))
        )
        return len(self.constraints) - 1

    def validate(self):
        """
        Checks that the program is well formed

        :raises ValueError: on an undeclared variable or inverted bounds
        """
        for variable in self.variables:
            if math.isnan(variable.lower) or math.isnan(variable.upper):
                raise ValueError("NaN bound on {}".format(variable.name))
            if variable.lower > variable.upper:
                raise ValueError(
                    "Inverted bounds on {}: [{}, {}]".format(
                        variable.name, variable.lower, variable.upper
                    )
                )
            if variable.lower == INF or variable.upper == -INF:
                raise ValueError("Empty domain for {}".format(variable.name))
        for index in self.objective:
            if not 0 <= index < self.num_variables:
                raise ValueError("Objective refers to undeclared variable {}".format(index))
        for constraint in self.constraints:
            if not math.isfinite(constraint.rhs):
                raise ValueError("Non finite right-hand side in {}".format(constraint.name))
            for index in constraint.coefficients:
                if not 0 <= index < self.num_variables:
                    raise ValueError(
                        "Constraint {} refers to undeclared variable {}".format(
                            constraint.name, index
                        )
                    )

    def to_matrices(self):
        """
        Dense form of the program

        :return: objective vector, constraint matrix, relations, rhs, lower and upper bounds
        """
        n = self.num_variables
        cost = np.zeros(n)
        for index, value in self.objective.items():
            cost[index] = value
        matrix = np.zeros((self.num_constraints, n))
        for row, constraint in enumerate(self.constraints):
            for index, value in constraint.coefficients.items():
                matrix[row, index] = value
        relations = np.array([c.relation for c in self.constraints], dtype=object)
        rhs = np.array([c.rhs for c in self.constraints], dtype=float)
        lower = np.array([v.lower for v in self.variables], dtype=float)
        upper = np.array([v.upper for v in self.variables], dtype=float)
        return cost, matrix, relations, rhs, lower, upper

    def max_violation(self, values):
        """
        Largest violation of a bound or a constraint, constraints being measured
        relative to max(1, abs(rhs))

        :param values: one value per variable
        :rtype: float
        """
        _, matrix, relations, rhs, lower, upper = self.to_matrices()
        values = np.asarray(values, dtype=float)
        worst = 0.0
        if values.size:
            worst = max(worst, float(np.max(lower - values)), float(np.max(values - upper)))
        if rhs.size:
            activity = matrix @ values
            scale = np.maximum(1.0, np.abs(rhs))
            excess = np.where(relations == GE, rhs - activity, activity - rhs)
            excess = np.where(relations == EQ, np.abs(activity - rhs), excess)
            worst = max(worst, float(np.max(excess / scale)))
        return max(worst, 0.0)

    def write_lp(self, path):
        """
        Writes the program in the plain-text LP format, every number printed
        with its exact repr

        :param path: output file
        """

        def terms(coefficients):
            if not coefficients:
                return " 0 {}".format(self.variables[0].name) if self.variables else " 0"
            return "".join(
                " {} {} {}".format("-" if value < 0 else "+", repr(abs(value)), self.variables[i].name)
                for i, value in sorted(coefficients.items())
            )

        lines = ["\\ Problem: {}".format(self.name)]
        lines.append("Minimize" if self.sense == "min" else "Maximize")
        lines.append(" obj:" + terms(self.objective))
        lines.append("Subject To")
        for constraint in self.constraints:
            lines.append(
                " {}:{} {} {}".format(
                    constraint.name,
                    terms(constraint.coefficients),
                    constraint.relation,
                    repr(constraint.rhs),
                )
            )
        lines.append("Bounds")
        for variable in self.variables:
            if variable.lower == -INF and variable.upper == INF:
                lines.append(" {} free".format(variable.name))
            elif variable.lower == variable.upper:
                lines.append(" {} = {}".format(variable.name, repr(variable.lower)))
            else:
                lower = "-inf" if variable.lower == -INF else repr(variable.lower)
                upper = "+inf" if variable.upper == INF else repr(variable.upper)
                lines.append(" {} <= {} <= {}".format(lower, variable.name, upper))
        lines.append("End")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class Solution:
    """Outcome of :func:`solve`. Values and objective are NaN unless optimal."""

    status: str
    objective: float
    values: np.ndarray
    names: List[str]
    iterations: int = 0

    @property
    def is_optimal(self):
        return self.status == OPTIMAL

    def __getitem__(self, key: Key) -> float:
        if isinstance(key, str):
            return float(self.values[self.names.index(key)])
        return float(self.values[key])

    def value_map(self) -> Dict[str, float]:
        return {name: float(value) for name, value in zip(self.names, self.values)}


def _no_solution(lp, status, iterations=0):
    return Solution(status, math.nan, np.full(lp.num_variables, math.nan), [v.name for v in lp.variables], iterations)


class _Tableau:
    """Working state of one bounded-variable simplex run: B^-1 A and all values"""

    def __init__(self, a_full, rhs, lower, upper, values, basis, options):
        self.a_full = a_full
        self.rhs = rhs
        self.lower = lower
        self.upper = upper
        self.x = values
        self.basis = basis
        self.is_basic = np.zeros(a_full.shape[1], dtype=bool)
        self.is_basic[basis] = True
        self.options = options
        self.tab = np.zeros_like(a_full)
        self.iterations = 0
        if options.max_iterations is not None:
            self.max_iterations = options.max_iterations
        else:
            self.max_iterations = max(1000, 50 * sum(a_full.shape))

    def refactor(self):
        if not self.basis.size:
            return
        basis_matrix = self.a_full[:, self.basis]
        nonbasic = ~self.is_basic
        try:
            self.tab = np.linalg.solve(basis_matrix, self.a_full)
            self.x[self.basis] = np.linalg.solve(
                basis_matrix, self.rhs - self.a_full[:, nonbasic] @ self.x[nonbasic]
            )
        except np.linalg.LinAlgError as error:
            raise LPSolverError("Singular basis after {} pivots".format(self.iterations)) from error

    def _pivot(self, row, column):
        pivot_row = self.tab[row] / self.tab[row, column]
        self.tab -= np.outer(self.tab[:, column], pivot_row)
        self.tab[row] = pivot_row
        self.is_basic[self.basis[row]] = False
        self.basis[row] = column
        self.is_basic[column] = True

    def optimize(self, cost):
        """
        Runs primal simplex iterations for the given cost vector

        :return: OPTIMAL or UNBOUNDED
        """
        options = self.options
        degenerate_run = 0
        use_bland = False
        since_refactor = 0
        movable = self.upper > self.lower
        while True:
            if self.iterations >= self.max_iterations:
                raise LPSolverError("Iteration limit {} reached".format(self.max_iterations))
            reduced = cost - cost[self.basis] @ self.tab
            free = movable & ~self.is_basic
            can_increase = free & (self.x < self.upper - options.tol_feas)
            can_decrease = free & (self.x > self.lower + options.tol_feas)
            improving = (can_increase & (reduced < -options.tol_opt)) | (
                can_decrease & (reduced > options.tol_opt)
            )
            if not improving.any():
                return OPTIMAL
            if use_bland:
                entering = int(np.flatnonzero(improving)[0])
            else:
                entering = int(np.argmax(np.where(improving, np.abs(reduced), -1.0)))
            direction = 1.0 if reduced[entering] < 0 else -1.0

            # basic values move by -theta * column
            column = direction * self.tab[:, entering]
            basic_x = self.x[self.basis]
            ratios = np.full(column.shape, INF)
            falling = column > options.tol_pivot
            rising = column < -options.tol_pivot
            with np.errstate(invalid="ignore"):
                ratios[falling] = (basic_x[falling] - self.lower[self.basis][falling]) / column[falling]
                ratios[rising] = (self.upper[self.basis][rising] - basic_x[rising]) / -column[rising]
            ratios = np.maximum(ratios, 0.0)
            theta_row = float(ratios.min()) if ratios.size else INF
            flip = self.upper[entering] - self.lower[entering]
            if theta_row == INF and flip == INF:
                return UNBOUNDED

            leaving_row = None
            if flip <= theta_row:
                theta = flip
            else:
                theta = theta_row
                ties = np.flatnonzero(ratios <= theta_row + 1e-12)
                if use_bland:
                    leaving_row = int(ties[np.argmin(self.basis[ties])])
                else:
                    leaving_row = int(ties[np.argmax(np.abs(column[ties]))])

            self.x[self.basis] = basic_x - theta * column
            self.x[entering] += direction * theta
            if leaving_row is None:
                self.x[entering] = self.upper[entering] if direction > 0 else self.lower[entering]
            else:
                leaving = self.basis[leaving_row]
                if column[leaving_row] > 0:
                    self.x[leaving] = self.lower[leaving]
                else:
                    self.x[leaving] = self.upper[leaving]
                self._pivot(leaving_row, entering)
                since_refactor += 1
            self.iterations += 1

            if theta <= 1e-12:
                degenerate_run += 1
                if not use_bland and degenerate_run >= options.bland_after:
                    LOGGER.debug("Switching to Bland's rule after %d degenerate pivots", degenerate_run)
                    use_bland = True
            else:
                degenerate_run = 0
                use_bland = False
            if since_refactor >= options.refactor_every:
                self.refactor()
                since_refactor = 0


class SimplexSolver:
    """
    Two-phase primal simplex on a dense tableau with bounded variables.

    Each row receives a slack; rows whose slack cannot start basic get an
    artificial variable, removed by the first phase. Entering variables follow
    Dantzig's rule (lowest index on ties) and Bland's rule after a run of
    degenerate pivots.
    """

    def __init__(self, options: Optional[SolverOptions] = None):
        self.options = options or SolverOptions()

    def solve(self, lp: LinearProgram) -> Solution:
        lp.validate()
        options = self.options
        cost, matrix, relations, rhs, lower, upper = lp.to_matrices()
        if lp.sense == "max":
            cost = -cost
        n, m = lp.num_variables, lp.num_constraints

        start = np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper, 0.0))
        slack_lower = np.where(relations == GE, -INF, 0.0).astype(float)
        slack_upper = np.where(relations == LE, INF, 0.0).astype(float)
        residual = rhs - matrix @ start if m else np.zeros(0)
        slack_basic = (residual >= slack_lower - options.tol_feas) & (
            residual <= slack_upper + options.tol_feas
        )
        slack_value = np.where(slack_basic, residual, np.clip(residual, slack_lower, slack_upper))
        art_rows = np.flatnonzero(~slack_basic)
        art_gap = residual[art_rows] - slack_value[art_rows]
        k = art_rows.size

        a_full = np.zeros((m, n + m + k))
        a_full[:, :n] = matrix
        a_full[:, n:n + m] = np.eye(m)
        a_full[art_rows, n + m + np.arange(k)] = np.sign(art_gap)
        full_lower = np.concatenate([lower, slack_lower, np.zeros(k)])
        full_upper = np.concatenate([upper, slack_upper, np.full(k, INF)])
        values = np.concatenate([start, slack_value, np.abs(art_gap)])
        basis = np.arange(n, n + m)
        basis[art_rows] = n + m + np.arange(k)

        tableau = _Tableau(a_full, rhs, full_lower, full_upper, values, basis, options)
        tableau.refactor()

        if k:
            phase_one = np.zeros(n + m + k)
            phase_one[n + m:] = 1.0
            tableau.optimize(phase_one)
            tableau.refactor()
            infeasibility = float(tableau.x[n + m:].sum())
            scale = max(1.0, float(np.max(np.abs(rhs)))) if m else 1.0
            if infeasibility > options.tol_feas * scale:
                LOGGER.debug("LP %s infeasible (residual %g)", lp.name, infeasibility)
                return _no_solution(lp, INFEASIBLE, tableau.iterations)
            tableau.upper[n + m:] = 0.0

        status = tableau.optimize(np.concatenate([cost, np.zeros(m + k)]))
        if status == UNBOUNDED:
            LOGGER.debug("LP %s unbounded", lp.name)
            return _no_solution(lp, UNBOUNDED, tableau.iterations)
        tableau.refactor()
        result = np.clip(tableau.x[:n], lower, upper)
        violation = lp.max_violation(result)
        if violation > 10 * options.tol_feas:
            raise LPSolverError(
                "LP {}: numerical breakdown, violation {:g}".format(lp.name, violation)
            )
        raw_cost, *_ = lp.to_matrices()
        return Solution(
            OPTIMAL,
            float(raw_cost @ result),
            result,
            [v.name for v in lp.variables],
            tableau.iterations,
        )


def _solve_highs(lp: LinearProgram) -> Solution:
    lp.validate()
    cost, matrix, relations, rhs, lower, upper = lp.to_matrices()
    sign = -1.0 if lp.sense == "max" else 1.0
    upper_rows = relations != EQ
    flip = np.where(relations == GE, -1.0, 1.0)
    a_ub = (matrix * flip[:, None])[upper_rows]
    b_ub = (rhs * flip)[upper_rows]
    a_eq = matrix[~upper_rows]
    b_eq = rhs[~upper_rows]
    bounds = [
        (None if math.isinf(low) else low, None if math.isinf(up) else up)
        for low, up in zip(lower, upper)
    ]
    result = linprog(
        sign * cost,
        A_ub=a_ub if b_ub.size else None,
        b_ub=b_ub if b_ub.size else None,
        A_eq=a_eq if b_eq.size else None,
        b_eq=b_eq if b_eq.size else None,
        bounds=bounds,
        method="highs",
    )
    if result.status == 2:
        return _no_solution(lp, INFEASIBLE, int(result.nit))
    if result.status == 3:
        return _no_solution(lp, UNBOUNDED, int(result.nit))
    if result.status != 0:
        raise LPSolverError("LP {}: {}".format(lp.name, result.message))
    values = np.clip(np.asarray(result.x, dtype=float), lower, upper)
    return Solution(OPTIMAL, float(cost @ values), values, [v.name for v in lp.variables], int(result.nit))


def solve(lp: LinearProgram, options: Optional[SolverOptions] = None) -> Solution:
    """
    Solves a linear program

    :param lp: the program
    :param options: solver options, defaults when None
    :return: the solution; infeasible and unbounded programs are statuses
    :raises LPSolverError: when the solver cannot conclude
    """
    options = options or SolverOptions()
    if options.dump_dir:
        dump_dir = Path(options.dump_dir)
        dump_dir.mkdir(parents=True, exist_ok=True)
        lp.write_lp(dump_dir / "{}.lp".format(lp.name))
    if options.method == "highs":
        solution = _solve_highs(lp)
    elif options.method == "simplex":
        solution = SimplexSolver(options).solve(lp)
    else:
        raise ValueError("Unknown LP method: {}".format(options.method))
    LOGGER.debug(
        "LP %s (%d vars, %d rows): %s after %d iterations",
        lp.name,
        lp.num_variables,
        lp.num_constraints,
        solution.status,
        solution.iterations,
    )
    return solution
