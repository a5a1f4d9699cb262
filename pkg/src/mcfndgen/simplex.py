"""Bounded-variable revised simplex for the feasibility screening LPs.

The toolkit carries its own solver so scenario screening has no external
solver dependency.  The implementation targets desk scale (up to a few
thousand rows): a dense explicit basis inverse updated by rank-one pivot
operations and rebuilt every ``REFACTOR_INTERVAL`` pivots, Dantzig
pricing with a switch to Bland's rule after a long degenerate streak,
and the standard two-bound ratio test with bound flips.

Infeasible starts are handled by an internal artificial phase: rows whose
residual cannot be absorbed by a singleton column (a slack) get a fresh
artificial variable, and the sum of artificials is minimized first.  The
LPs built by :mod:`mcfndgen.feasibility` almost always crash to a feasible
basis directly, so the artificial phase only runs for scenarios with
negative sampled capacities and similar pathologies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse

from .errors import SolverStallError

REFACTOR_INTERVAL = 50
MAX_PIVOTS = 1_000_000
BLAND_DEGENERATE_LIMIT = 1000

_FEAS_TOL = 1e-9
_COST_TOL = 1e-9

_AT_LOWER = 0
_AT_UPPER = 1
_BASIC = 2


class _DualUnbounded(Exception):
    """Internal: the dual is unbounded, so the primal LP is infeasible."""


@dataclass(frozen=True)
class LpProblem:
    """min c'x subject to A x (<=|=) rhs and lower <= x <= upper."""

    n_vars: int
    objective: np.ndarray
    a_matrix: scipy.sparse.csr_matrix
    senses: np.ndarray  # 'L' or 'E' per row
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        m, n = self.a_matrix.shape
        if n != self.n_vars:
            raise ValueError(f"matrix has {n} columns for {self.n_vars} variables")
        for name, size in (("objective", n), ("lower", n), ("upper", n), ("rhs", m), ("senses", m)):
            if getattr(self, name).shape != (size,):
                raise ValueError(f"{name} must have shape ({size},)")

    @property
    def row_count(self) -> int:
        return self.a_matrix.shape[0]


@dataclass
class LpSolution:
    status: str  # "optimal" or "infeasible"
    objective: float
    x: Optional[np.ndarray]  # structural variable values when optimal


class _Simplex:
    """One solve; holds the working equality-form problem."""

    def __init__(self, lp: LpProblem):
        m, n = lp.a_matrix.shape
        ineq = np.flatnonzero(lp.senses == "L")
        n_slack = ineq.size
        # columns: structurals, logical slacks for <= rows, one artificial per row
        slack_cols = scipy.sparse.csc_matrix(
            (np.ones(n_slack), (ineq, np.arange(n_slack))), shape=(m, n_slack)
        )
        self.n_struct = n
        self.n_slack = n_slack
        self.m = m
        self.art_offset = n + n_slack
        self.total = n + n_slack + m
        self.a = scipy.sparse.hstack(
            [lp.a_matrix.tocsc(), slack_cols, scipy.sparse.identity(m, format="csc")],
            format="csc",
        )
        self.lower = np.concatenate([lp.lower, np.zeros(n_slack), np.zeros(m)])
        self.upper = np.concatenate([lp.upper, np.full(n_slack, np.inf), np.zeros(m)])
        self.cost = np.concatenate([lp.objective, np.zeros(n_slack + m)])
        self.b = lp.rhs.astype(float)
        if not np.isfinite(self.lower[: self.n_struct]).all():
            raise ValueError("free variables are not supported")

        self.status = np.full(self.total, _AT_LOWER, dtype=np.int8)
        self.values = self.lower.copy()  # nonbasic resting values
        self.basis = np.empty(m, dtype=int)
        self.binv = np.empty((m, m))
        self.x_basic = np.empty(m)
        self.degenerate_streak = 0
        self.pivots = 0

    # -- sparse column helpers ----------------------------------------------

    def _column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        s, e = self.a.indptr[j], self.a.indptr[j + 1]
        return self.a.indices[s:e], self.a.data[s:e]

    def _ftran(self, j: int) -> np.ndarray:
        rows, vals = self._column(j)
        return self.binv[:, rows] @ vals

    # -- setup ---------------------------------------------------------------

    def crash(self) -> bool:
        """Build a feasible starting basis; returns True if artificials opened."""
        resting = np.where(np.arange(self.total) < self.art_offset, self.values, 0.0)
        residual = self.b - self.a @ resting
        taken = np.zeros(self.total, dtype=bool)
        need_artificial = []
        singleton = self._singleton_columns()
        for i in range(self.m):
            chosen = -1
            for j in singleton.get(i, ()):
                if taken[j]:
                    continue
                coef = self.a.data[self.a.indptr[j]]
                value = self.values[j] + residual[i] / coef
                if self.lower[j] - _FEAS_TOL <= value <= self.upper[j] + _FEAS_TOL:
                    chosen = j
                    break
            if chosen >= 0:
                taken[chosen] = True
                self.basis[i] = chosen
            else:
                art = self.art_offset + i
                self.upper[art] = np.inf
                if residual[i] < 0:
                    # flip the artificial's sign so its value is nonnegative
                    s, e = self.a.indptr[art], self.a.indptr[art + 1]
                    self.a.data[s:e] = -1.0
                self.basis[i] = art
                need_artificial.append(art)
        self.status[self.basis] = _BASIC
        self.refactor()
        return bool(need_artificial)

    def _singleton_columns(self) -> dict[int, list[int]]:
        """row -> columns whose only nonzero sits in that row (slacks first)."""
        nnz = np.diff(self.a.indptr[: self.art_offset + 1])
        singles = np.flatnonzero(nnz == 1)
        out: dict[int, list[int]] = {}
        for j in singles[::-1]:  # logical slacks get priority over structurals
            out.setdefault(int(self.a.indices[self.a.indptr[j]]), []).append(int(j))
        return out

    def refactor(self) -> None:
        dense = self.a[:, self.basis].toarray()
        self.binv = np.linalg.inv(dense)
        self.recompute_basics()

    def recompute_basics(self) -> None:
        resting = np.where(self.status == _BASIC, 0.0, self.values)
        self.x_basic = self.binv @ (self.b - self.a @ resting)

    def objective_value(self, cost: Optional[np.ndarray] = None) -> float:
        if cost is None:
            cost = self.cost
        resting = self.status != _BASIC
        return float(cost[self.basis] @ self.x_basic + cost[resting] @ self.values[resting])

    # -- iteration -----------------------------------------------------------

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        y = cost[self.basis] @ self.binv
        return cost - (y @ self.a)

    def choose_entering(self, d: np.ndarray, bland: bool) -> int:
        movable = self.upper - self.lower > 0
        down = (self.status == _AT_LOWER) & movable & (d < -_COST_TOL)
        up = (self.status == _AT_UPPER) & movable & (d > _COST_TOL)
        eligible = np.flatnonzero(down | up)
        if eligible.size == 0:
            return -1
        if bland:
            return int(eligible[0])
        return int(eligible[np.argmax(np.abs(d[eligible]))])

    def step(self, cost: np.ndarray, bland: bool) -> bool:
        """One pivot or bound flip; False when optimal for ``cost``."""
        d = self.reduced_costs(cost)
        q = self.choose_entering(d, bland)
        if q < 0:
            return False
        sigma = 1.0 if self.status[q] == _AT_LOWER else -1.0
        w = self._ftran(q)

        # ratio test: basics hitting a bound, or the entering variable
        # flipping to its other bound
        sw = sigma * w
        limit = self.upper[q] - self.lower[q]  # may be inf
        leave = -1
        leave_to_upper = False
        lo_b = self.lower[self.basis]
        up_b = self.upper[self.basis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t_lower = np.where(sw > _FEAS_TOL, (self.x_basic - lo_b) / sw, np.inf)
            t_upper = np.where(sw < -_FEAS_TOL, (self.x_basic - up_b) / sw, np.inf)
        ratios = np.minimum(t_lower, t_upper)
        t_min = float(ratios.min(initial=np.inf))
        if limit < t_min:
            # bound flip, no basis change
            t = limit
            self.x_basic -= t * sw
            self.values[q] = self.upper[q] if sigma > 0 else self.lower[q]
            self.status[q] = _AT_UPPER if sigma > 0 else _AT_LOWER
            self.pivots += 1
            self.degenerate_streak = 0
            return True
        if not np.isfinite(t_min):
            raise SolverStallError("the working objective is unbounded below")
        t = max(t_min, 0.0)
        candidates = np.flatnonzero(ratios <= t_min + _FEAS_TOL)
        if bland:
            leave = int(candidates[np.argmin(self.basis[candidates])])
        else:
            leave = int(candidates[np.argmax(np.abs(sw[candidates]))])
        leave_to_upper = t_upper[leave] <= t_lower[leave]

        entering_value = (self.lower[q] if sigma > 0 else self.upper[q]) + sigma * t
        leaving = self.basis[leave]
        self.values[leaving] = self.upper[leaving] if leave_to_upper else self.lower[leaving]
        self.status[leaving] = _AT_UPPER if leave_to_upper else _AT_LOWER
        self.x_basic -= t * sw
        self.x_basic[leave] = entering_value
        self.basis[leave] = q
        self.status[q] = _BASIC

        # rank-one basis inverse update
        pivot = w[leave]
        self.binv[leave] /= pivot
        others = w.copy()
        others[leave] = 0.0
        self.binv -= np.outer(others, self.binv[leave])

        self.pivots += 1
        if t <= _FEAS_TOL:
            self.degenerate_streak += 1
        else:
            self.degenerate_streak = 0
        if self.pivots % REFACTOR_INTERVAL == 0:
            self.refactor()
        return True

    def minimize(self, cost: np.ndarray) -> float:
        while True:
            if self.pivots >= MAX_PIVOTS:
                raise SolverStallError(
                    f"pivot budget of {MAX_PIVOTS} exhausted; feasibility undecided"
                )
            bland = self.degenerate_streak > BLAND_DEGENERATE_LIMIT
            if not self.step(cost, bland):
                break
        return self.objective_value(cost)

    def dual_step(self, cost: np.ndarray) -> bool:
        """One dual pivot; False when primal feasible, raises when infeasible.

        Requires a dual-feasible basis for ``cost`` (any optimal basis of
        the same objective under a different right-hand side qualifies).
        """
        below = self.lower[self.basis] - self.x_basic
        above = self.x_basic - self.upper[self.basis]
        violation = np.maximum(below, above)
        r = int(np.argmax(violation))
        if violation[r] <= _FEAS_TOL:
            return False
        going_down = above[r] > below[r]  # leaving variable exits at its upper bound
        alpha = self.binv[r] @ self.a
        movable = self.upper - self.lower > 0
        movable[self.basis] = False
        if going_down:
            up_ok = (self.status == _AT_LOWER) & (alpha > _FEAS_TOL)
            down_ok = (self.status == _AT_UPPER) & (alpha < -_FEAS_TOL)
        else:
            up_ok = (self.status == _AT_LOWER) & (alpha < -_FEAS_TOL)
            down_ok = (self.status == _AT_UPPER) & (alpha > _FEAS_TOL)
        candidates = np.flatnonzero((up_ok | down_ok) & movable)
        if candidates.size == 0:
            raise _DualUnbounded
        d = self.reduced_costs(cost)
        ratios = np.abs(d[candidates]) / np.abs(alpha[candidates])
        best = ratios.min()
        ties = candidates[np.flatnonzero(ratios <= best + _COST_TOL)]
        q = int(ties[np.argmax(np.abs(alpha[ties]))])

        target = self.upper[self.basis[r]] if going_down else self.lower[self.basis[r]]
        w = self._ftran(q)
        delta = (self.x_basic[r] - target) / w[r]
        leaving = self.basis[r]
        self.values[leaving] = target
        self.status[leaving] = _AT_UPPER if going_down else _AT_LOWER
        entering_value = self.values[q] + delta
        self.x_basic -= delta * w
        self.x_basic[r] = entering_value
        self.basis[r] = q
        self.status[q] = _BASIC

        pivot = w[r]
        self.binv[r] /= pivot
        others = w.copy()
        others[r] = 0.0
        self.binv -= np.outer(others, self.binv[r])
        self.pivots += 1
        if self.pivots % REFACTOR_INTERVAL == 0:
            self.refactor()
        return True

    def dual_minimize(self, cost: np.ndarray) -> None:
        while True:
            if self.pivots >= MAX_PIVOTS:
                raise SolverStallError(
                    f"pivot budget of {MAX_PIVOTS} exhausted; feasibility undecided"
                )
            if not self.dual_step(cost):
                return

    def close_artificials(self) -> None:
        """Pin all artificials to zero after a successful artificial phase."""
        arts = np.arange(self.art_offset, self.total)
        self.lower[arts] = 0.0
        self.upper[arts] = 0.0
        self.values[arts] = 0.0
        basic_arts = [i for i in range(self.m) if self.basis[i] >= self.art_offset]
        for i in basic_arts:
            # swap in any usable non-artificial column; a redundant row keeps
            # its artificial, fixed at zero
            row = self.binv[i] @ self.a[:, : self.art_offset]
            for j in np.flatnonzero(np.abs(row) > 1e-7):
                if self.status[j] != _BASIC:
                    self._replace_basic(i, int(j))
                    break

    def _replace_basic(self, i: int, q: int) -> None:
        w = self._ftran(q)
        leaving = self.basis[i]
        self.status[leaving] = _AT_LOWER
        self.values[leaving] = self.lower[leaving]
        self.basis[i] = q
        self.status[q] = _BASIC
        pivot = w[i]
        self.binv[i] /= pivot
        others = w.copy()
        others[i] = 0.0
        self.binv -= np.outer(others, self.binv[i])
        self.refactor()

    def solution(self, lp: LpProblem) -> np.ndarray:
        x = self.values[: self.n_struct].copy()
        for i, j in enumerate(self.basis):
            if j < self.n_struct:
                x[j] = self.x_basic[i]
        return x


def solve(lp: LpProblem) -> LpSolution:
    """Solve the LP to optimality or prove it infeasible."""
    if (lp.upper < lp.lower).any():
        return LpSolution(status="infeasible", objective=math.inf, x=None)
    sx = _Simplex(lp)
    if _cold_solve(sx, lp) is None:
        return LpSolution(status="infeasible", objective=math.inf, x=None)
    return LpSolution(status="optimal", objective=sx.objective_value(), x=sx.solution(lp))


def _cold_solve(sx: _Simplex, lp: LpProblem) -> Optional[float]:
    """Crash, artificial phase if needed, then optimize; None if infeasible."""
    needs_phase1 = sx.crash()
    if needs_phase1:
        art_cost = np.zeros(sx.total)
        art_cost[sx.art_offset :] = 1.0
        infeasibility = sx.minimize(art_cost)
        scale = max(1.0, float(np.abs(lp.rhs).max(initial=0.0)))
        if infeasibility > 1e-9 * scale:
            return None
        sx.close_artificials()
    return sx.minimize(sx.cost)


class RepeatedLpSolver:
    """Solves one LP repeatedly under changing right-hand sides and bounds.

    The constraint matrix, objective and lower bounds are fixed at
    construction.  After the first (cold) solve, each further solve warm
    starts a dual simplex from the previous optimal basis: the reduced
    costs do not depend on the right-hand side, so that basis stays dual
    feasible and only the newly violated basic variables need pivots.
    Results are the same as cold solves of the modified problem.
    """

    def __init__(self, lp: LpProblem):
        self.lp = lp
        self._sx: Optional[_Simplex] = None

    def solve(self, rhs: np.ndarray, upper: Optional[np.ndarray] = None) -> LpSolution:
        new_upper = self.lp.upper if upper is None else upper
        if (new_upper < self.lp.lower).any():
            return LpSolution(status="infeasible", objective=math.inf, x=None)
        if self._sx is None:
            lp = LpProblem(
                n_vars=self.lp.n_vars,
                objective=self.lp.objective,
                a_matrix=self.lp.a_matrix,
                senses=self.lp.senses,
                rhs=rhs,
                lower=self.lp.lower,
                upper=new_upper,
            )
            sx = _Simplex(lp)
            if _cold_solve(sx, lp) is None:
                return LpSolution(status="infeasible", objective=math.inf, x=None)
            self._sx = sx
            return LpSolution(status="optimal", objective=sx.objective_value(), x=sx.solution(lp))

        sx = self._sx
        sx.b = rhs.astype(float)
        n = self.lp.n_vars
        sx.upper[:n] = new_upper
        at_upper = np.flatnonzero(sx.status[:n] == _AT_UPPER)
        sx.values[at_upper] = sx.upper[at_upper]
        sx.recompute_basics()
        try:
            sx.dual_minimize(sx.cost)
        except _DualUnbounded:
            # dual pivots preserve dual feasibility: the basis remains a
            # valid warm start for the next right-hand side
            return LpSolution(status="infeasible", objective=math.inf, x=None)
        sx.minimize(sx.cost)  # clears any residual reduced-cost drift
        return LpSolution(
            status="optimal", objective=sx.objective_value(), x=sx.solution(self.lp)
        )
