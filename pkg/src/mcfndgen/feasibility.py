"""Second-stage feasibility screening of scenarios.

Each scenario column is written into a copy of the base instance, turned
into a slack-relaxed routing LP with every arc open, and solved exactly.
A scenario is feasible when all demands can be routed within capacities,
i.e. the minimal total conservation slack is (numerically) zero.

Scenario values arrive unclamped, so physically meaningless draws such
as negative capacities are not special-cased anywhere: they simply make
the LP infeasible and the scenario is rejected like any other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.sparse

from .errors import NoFeasibleScenarioError
from .model import (
    CANONICAL_FAMILY_ORDER,
    Commodity,
    DetInstance,
    ParamFamily,
    RandomizationSelection,
    ScenarioMatrix,
)
from .simplex import LpProblem, LpSolution, RepeatedLpSolver, solve

FEASIBILITY_TOL = 1e-6


@dataclass(frozen=True)
class FeasibilityReport:
    """Outcome of screening one scenario set."""

    tested_count: int
    rejected_count: int
    per_scenario: tuple[tuple[int, bool, float], ...]  # (index, feasible, objective)

    @property
    def retained_count(self) -> int:
        return self.tested_count - self.rejected_count


def scenario_instance(
    base: DetInstance, selection: RandomizationSelection, column: np.ndarray
) -> DetInstance:
    """Copy of ``base`` with the selected parameters replaced by ``column``.

    The column follows the canonical variable order; everything outside
    the selection is untouched.
    """
    column = np.asarray(column, dtype=float)
    expected = selection.variable_count(base)
    if column.shape != (expected,):
        raise ValueError(f"expected a column of {expected} values, got shape {column.shape}")
    n_a, n_k = base.arc_count, base.commodity_count
    fields: dict = {}
    offset = 0
    for fam in CANONICAL_FAMILY_ORDER:
        if fam not in selection.families:
            continue
        if fam == ParamFamily.DEMAND:
            part, offset = column[offset : offset + n_k], offset + n_k
            fields["commodities"] = tuple(
                Commodity(c.origin, c.destination, float(d))
                for c, d in zip(base.commodities, part)
            )
        elif fam == ParamFamily.ARC_CAPACITY:
            fields["capacity"], offset = column[offset : offset + n_a], offset + n_a
        elif fam == ParamFamily.COM_CAPACITY:
            part, offset = column[offset : offset + n_a * n_k], offset + n_a * n_k
            fields["com_capacity"] = part.reshape(n_a, n_k)
        elif fam == ParamFamily.FIXED_COST:
            fields["fixed_cost"], offset = column[offset : offset + n_a], offset + n_a
        else:
            part, offset = column[offset : offset + n_a * n_k], offset + n_a * n_k
            fields["var_cost"] = part.reshape(n_a, n_k)
    return replace(base, **fields)


def build_feasibility_lp(instance: DetInstance) -> LpProblem:
    """Slack-relaxed routing LP of the instance with all arcs open.

    Variables: flows x[arc, commodity] (arc-major), then slack pairs
    (s+, s-) per (node, commodity).  Rows: one conservation equality per
    (node, commodity) with +s+ - s- added, then one capacity row per arc.
    Objective: total conservation slack.
    """
    n_n, n_a, n_k = instance.node_count, instance.arc_count, instance.commodity_count
    n_flow = n_a * n_k
    n_slack = n_n * n_k
    n_vars = n_flow + 2 * n_slack
    n_rows = n_slack + n_a

    tails, heads = instance.graph.tails, instance.graph.heads
    flow_cols = np.arange(n_flow)
    arc_of = flow_cols // n_k
    com_of = flow_cols % n_k
    slack_rows = np.arange(n_slack)

    rows = np.concatenate(
        [
            tails[arc_of] * n_k + com_of,           # outgoing flow
            heads[arc_of] * n_k + com_of,           # incoming flow
            slack_rows,                              # s+
            slack_rows,                              # s-
            n_slack + arc_of,                        # capacity rows
        ]
    )
    cols = np.concatenate(
        [
            flow_cols,
            flow_cols,
            n_flow + slack_rows,
            n_flow + n_slack + slack_rows,
            flow_cols,
        ]
    )
    data = np.concatenate(
        [
            np.ones(n_flow),
            -np.ones(n_flow),
            np.ones(n_slack),
            -np.ones(n_slack),
            np.ones(n_flow),
        ]
    )
    matrix = scipy.sparse.csr_matrix((data, (rows, cols)), shape=(n_rows, n_vars))

    balance = np.zeros((n_n, n_k))
    for k, com in enumerate(instance.commodities):
        balance[com.origin, k] += com.demand
        balance[com.destination, k] -= com.demand
    rhs = np.concatenate([balance.ravel(), instance.capacity])
    senses = np.array(["E"] * n_slack + ["L"] * n_a)

    upper = np.full(n_vars, np.inf)
    if instance.use_com_capacity:
        upper[:n_flow] = instance.com_capacity.ravel()
    objective = np.zeros(n_vars)
    objective[n_flow:] = 1.0
    return LpProblem(
        n_vars=n_vars,
        objective=objective,
        a_matrix=matrix,
        senses=senses,
        rhs=rhs,
        lower=np.zeros(n_vars),
        upper=upper,
    )


def _demand_scale(lp: LpProblem) -> float:
    """max(1, total demand volume), recovered from the equality rows."""
    eq = lp.senses == "E"
    return max(1.0, float(np.where(lp.rhs[eq] > 0, lp.rhs[eq], 0.0).sum()))


def check_feasible(lp: LpProblem) -> tuple[bool, float]:
    """Solve the screening LP; feasible when the slack optimum is ~zero.

    The tolerance scales with the demand volume so the test is
    unit-independent.  An LP that is itself inconsistent (negative
    capacities, empty variable boxes) reports infeasible with an
    infinite objective.
    """
    result = solve(lp)
    if result.status != "optimal":
        return False, math.inf
    return result.objective <= FEASIBILITY_TOL * _demand_scale(lp), result.objective


def solve_lp(lp: LpProblem) -> LpSolution:
    """Full solve, exposing the flow values (used by tests and reports)."""
    return solve(lp)


def filter_scenarios(
    base: DetInstance,
    selection: RandomizationSelection,
    scenarios: ScenarioMatrix,
    verbosity: int = 0,
) -> tuple[ScenarioMatrix, FeasibilityReport]:
    """Drop infeasible columns, renormalizing the retained probabilities.

    Scenario LPs share one constraint matrix: only right-hand sides
    (demands, capacities) and flow bounds vary.  The screening therefore
    reuses one solver with a warm-started basis across columns, giving
    results identical to an independent :func:`check_feasible` per column.
    """
    solver: Optional[RepeatedLpSolver] = None
    outcomes: list[tuple[int, bool, float]] = []
    keep: list[int] = []
    for t in range(scenarios.scenario_count):
        instance = scenario_instance(base, selection, scenarios.values[:, t])
        lp = build_feasibility_lp(instance)
        if solver is None:
            solver = RepeatedLpSolver(lp)
        result = solver.solve(lp.rhs, lp.upper)
        if result.status != "optimal":
            feasible, objective = False, math.inf
        else:
            feasible = result.objective <= FEASIBILITY_TOL * _demand_scale(lp)
            objective = result.objective
        outcomes.append((t, feasible, objective))
        if feasible:
            keep.append(t)
    report = FeasibilityReport(
        tested_count=scenarios.scenario_count,
        rejected_count=scenarios.scenario_count - len(keep),
        per_scenario=tuple(outcomes),
    )
    if verbosity >= 1:
        print(f"scenarios tested: {report.tested_count}, rejected: {report.rejected_count}")
    if not keep:
        raise NoFeasibleScenarioError(
            f"all {report.tested_count} scenarios failed the feasibility check"
        )
    probs = scenarios.probabilities[keep]
    retained = ScenarioMatrix(scenarios.values[:, keep], probs / probs.sum())
    return retained, report
