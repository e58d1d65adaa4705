"""Exact rational linear programming: two-phase simplex plus branch-and-bound.

All variables are nonnegative; coefficients, bounds, and solutions are exact
rationals. Bland's rule guarantees termination. When gmpy2 is available its
mpq type is used inside the tableau for speed; the public interface speaks
`fractions.Fraction` either way.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

try:
    from gmpy2 import mpq as _mpq
except ImportError:  # pragma: no cover - exercised only without gmpy2
    _mpq = None

LESS_EQUAL = "<="
EQUAL = "="
GREATER_EQUAL = ">="
_SENSES = (LESS_EQUAL, EQUAL, GREATER_EQUAL)

MIN = "min"
MAX = "max"

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class SolverError(RuntimeError):
    """Internal solver failure (a reported optimum did not re-verify)."""


class ResourceLimitError(SolverError):
    """Branch-and-bound node budget exceeded before proving optimality."""


def _to_fast(value: Fraction):
    if _mpq is None:
        return value
    return _mpq(value.numerator, value.denominator)


def _to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    return Fraction(int(value.numerator), int(value.denominator))


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: dict
    sense: str
    rhs: Fraction


class LinearProgram:
    """Linear program over named nonnegative rational variables.

    Nonnegativity of every variable is built in; any other bound is an
    ordinary constraint row. Integrality marks are ignored by solve_lp and
    honored by solve_ilp.
    """

    def __init__(self):
        self.variables: list[str] = []
        self._index: dict[str, int] = {}
        self.constraints: list[Constraint] = []
        self.objective: dict[int, Fraction] = {}
        self.sense: str = MIN
        self.integral: set[int] = set()
        self.meta: dict = {}

    def add_variable(self, name: str, integral: bool = False) -> str:
        if name in self._index:
            raise ValueError(f"duplicate variable {name!r}")
        self._index[name] = len(self.variables)
        self.variables.append(name)
        if integral:
            self.integral.add(self._index[name])
        return name

    def variable_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"undeclared variable {name!r}") from None

    def add_constraint(self, coeffs: Mapping[str, object], sense: str, rhs, name: str | None = None):
        if sense not in _SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        indexed = {}
        for var, c in coeffs.items():
            c = Fraction(c)
            if c:
                indexed[self.variable_index(var)] = indexed.get(self.variable_index(var), Fraction(0)) + c
        self.constraints.append(
            Constraint(name or f"row{len(self.constraints)}", indexed, sense, Fraction(rhs))
        )

    def set_objective(self, coeffs: Mapping[str, object], sense: str = MIN):
        if sense not in (MIN, MAX):
            raise ValueError(f"objective sense must be min or max, got {sense!r}")
        self.objective = {}
        for var, c in coeffs.items():
            c = Fraction(c)
            if c:
                self.objective[self.variable_index(var)] = c
        self.sense = sense

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    def objective_value(self, assignment: Mapping[str, Fraction]) -> Fraction:
        total = Fraction(0)
        for idx, c in self.objective.items():
            total += c * assignment.get(self.variables[idx], Fraction(0))
        return total

    def point_violations(self, assignment: Mapping[str, Fraction]) -> list[str]:
        """Exact re-check of a candidate point against every constraint."""
        problems = []
        for name, value in assignment.items():
            if name in self._index and value < 0:
                problems.append(f"{name} = {value} < 0")
        for con in self.constraints:
            lhs = Fraction(0)
            for idx, c in con.coeffs.items():
                lhs += c * assignment.get(self.variables[idx], Fraction(0))
            ok = (
                lhs <= con.rhs
                if con.sense == LESS_EQUAL
                else lhs >= con.rhs if con.sense == GREATER_EQUAL else lhs == con.rhs
            )
            if not ok:
                problems.append(f"{con.name}: {lhs} {con.sense} {con.rhs} fails")
        return problems

    def dump(self) -> str:
        """Interchange-style text dump with p/q rationals and a name legend."""

        def rat(value: Fraction) -> str:
            return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"

        def term(idx: int, c: Fraction, first: bool) -> str:
            mag = rat(abs(c))
            sign = "-" if c < 0 else ("" if first else "+")
            return f"{sign} {mag} v{idx}".strip()

        lines = ["\\ exact rational LP"]
        lines += [f"\\ v{i} = {name}" for i, name in enumerate(self.variables)]
        lines.append("Minimize" if self.sense == MIN else "Maximize")
        obj = " ".join(
            term(i, c, first=(pos == 0))
            for pos, (i, c) in enumerate(sorted(self.objective.items()))
        )
        lines.append(f" obj: {obj if obj else '0 v0'}")
        lines.append("Subject To")
        for con in self.constraints:
            body = " ".join(
                term(i, c, first=(pos == 0))
                for pos, (i, c) in enumerate(sorted(con.coeffs.items()))
            )
            op = {LESS_EQUAL: "<=", EQUAL: "=", GREATER_EQUAL: ">="}[con.sense]
            lines.append(f" {con.name.replace(' ', '_')}: {body if body else '0 v0'} {op} {rat(con.rhs)}")
        lines.append("Bounds")
        lines += [f" 0 <= v{i}" for i in range(self.num_variables)]
        if self.integral:
            lines.append("General")
            lines.append(" " + " ".join(f"v{i}" for i in sorted(self.integral)))
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass
class LpResult:
    """Solver outcome; when optimal, the assignment re-verified exactly."""

    status: str
    objective: Fraction | None = None
    assignment: dict = field(default_factory=dict)
    basis: tuple = ()
    nodes_explored: int = 1
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Tableau simplex
# ---------------------------------------------------------------------------

def _pivot(tableau, obj_row, row: int, col: int):
    prow = tableau[row]
    inv = prow[col]
    if inv != 1:
        tableau[row] = prow = [v / inv for v in prow]
    for target in tableau:
        if target is prow:
            continue
        f = target[col]
        if f:
            for j, b in enumerate(prow):
                if b:
                    target[j] -= f * b
    f = obj_row[col]
    if f:
        for j, b in enumerate(prow):
            if b:
                obj_row[j] -= f * b


def _run_simplex(tableau, basis, costs, banned, zero):
    """Minimize costs over the tableau with Bland's rule; returns status."""
    ncols = len(tableau[0]) - 1
    obj_row = [costs[j] for j in range(ncols)] + [zero]
    for i, b in enumerate(basis):
        cb = costs[b]
        if cb:
            row = tableau[i]
            for j, v in enumerate(row):
                if v:
                    obj_row[j] -= cb * v
    while True:
        entering = -1
        for j in range(ncols):
            if j not in banned and obj_row[j] < zero:
                entering = j
                break
        if entering < 0:
            return OPTIMAL, obj_row
        leave_row = -1
        best_ratio = None
        for i, row in enumerate(tableau):
            coef = row[entering]
            if coef > zero:
                ratio = row[-1] / coef
                if (
                    best_ratio is None
                    or ratio < best_ratio
                    or (ratio == best_ratio and basis[i] < basis[leave_row])
                ):
                    best_ratio = ratio
                    leave_row = i
        if leave_row < 0:
            return UNBOUNDED, obj_row
        _pivot(tableau, obj_row, leave_row, entering)
        basis[leave_row] = entering


def _solve_constraints(lp: LinearProgram, extra: list[Constraint]):
    """Two-phase simplex over the LP rows plus branch rows; exact throughout."""
    constraints = list(lp.constraints) + list(extra)
    n = lp.num_variables
    zero = _to_fast(Fraction(0))
    one = _to_fast(Fraction(1))

    rows = []
    senses = []
    for con in constraints:
        dense = [zero] * n
        for idx, c in con.coeffs.items():
            dense[idx] += _to_fast(c)
        rhs = _to_fast(con.rhs)
        sense = con.sense
        if rhs < zero:
            dense = [-v for v in dense]
            rhs = -rhs
            sense = {LESS_EQUAL: GREATER_EQUAL, GREATER_EQUAL: LESS_EQUAL, EQUAL: EQUAL}[sense]
        rows.append((dense, rhs))
        senses.append(sense)

    m = len(rows)
    num_slack = sum(1 for s in senses if s != EQUAL)
    total = n + num_slack + m  # artificial block sized for the worst case
    tableau = []
    basis = []
    artificial: list[int] = []
    slack_pos = 0
    art_pos = 0
    for (dense, rhs), sense in zip(rows, senses):
        row = dense + [zero] * (num_slack + m) + [rhs]
        if sense == LESS_EQUAL:
            row[n + slack_pos] = one
            basis.append(n + slack_pos)
            slack_pos += 1
        elif sense == GREATER_EQUAL:
            row[n + slack_pos] = -one
            slack_pos += 1
            row[n + num_slack + art_pos] = one
            basis.append(n + num_slack + art_pos)
            artificial.append(n + num_slack + art_pos)
            art_pos += 1
        else:
            row[n + num_slack + art_pos] = one
            basis.append(n + num_slack + art_pos)
            artificial.append(n + num_slack + art_pos)
            art_pos += 1
        tableau.append(row)

    if m == 0:
        # No rows: x = 0 is optimal unless some cost rewards growing a variable.
        if any(
            (c < 0 if lp.sense == MIN else c > 0) for c in lp.objective.values()
        ):
            return UNBOUNDED, None, None, None
        assignment = {name: Fraction(0) for name in lp.variables}
        return OPTIMAL, assignment, (), constraints

    art_set = set(artificial)
    if artificial:
        phase1 = [one if j in art_set else zero for j in range(total)]
        status, obj_row = _run_simplex(tableau, basis, phase1, frozenset(), zero)
        if status != OPTIMAL or -obj_row[-1] != zero:
            return INFEASIBLE, None, None, None
        # Drive any artificial that is still basic (at zero) out of the basis,
        # dropping rows that turn out to be redundant.
        for i in range(len(tableau) - 1, -1, -1):
            if basis[i] in art_set:
                pivot_col = next(
                    (j for j in range(n + num_slack) if tableau[i][j] != zero), None
                )
                if pivot_col is None:
                    del tableau[i]
                    del basis[i]
                else:
                    _pivot(tableau, obj_row, i, pivot_col)
                    basis[i] = pivot_col

    costs = [zero] * total
    for idx, c in lp.objective.items():
        costs[idx] = _to_fast(c if lp.sense == MIN else -c)
    status, _ = _run_simplex(tableau, basis, costs, art_set, zero)
    if status == UNBOUNDED:
        return UNBOUNDED, None, None, None

    values = {}
    for i, b in enumerate(basis):
        if b < n:
            values[b] = tableau[i][-1]
    assignment = {
        lp.variables[j]: _to_fraction(values.get(j, zero)) for j in range(n)
    }
    basis_names = []
    for b in sorted(basis):
        if b < n:
            basis_names.append(lp.variables[b])
        elif b < n + num_slack:
            basis_names.append(f"slack{b - n}")
    return OPTIMAL, assignment, tuple(basis_names), constraints


def _solve_relaxation(lp: LinearProgram, extra: list[Constraint]) -> LpResult:
    status, assignment, basis, constraints = _solve_constraints(lp, extra)
    if status != OPTIMAL:
        return LpResult(status=status, meta=dict(lp.meta))
    problems = lp.point_violations(assignment)
    for con in extra:
        lhs = sum(
            (c * assignment.get(lp.variables[i], Fraction(0)) for i, c in con.coeffs.items()),
            Fraction(0),
        )
        ok = (
            lhs <= con.rhs
            if con.sense == LESS_EQUAL
            else lhs >= con.rhs if con.sense == GREATER_EQUAL else lhs == con.rhs
        )
        if not ok:
            problems.append(f"{con.name}: {lhs} {con.sense} {con.rhs} fails")
    if problems:
        raise SolverError("optimum failed exact re-verification: " + "; ".join(problems))
    return LpResult(
        status=OPTIMAL,
        objective=lp.objective_value(assignment),
        assignment=assignment,
        basis=basis,
        meta=dict(lp.meta),
    )


def solve_lp(lp: LinearProgram) -> LpResult:
    """Solve a pure LP exactly; integrality marks are rejected."""
    if lp.integral:
        raise ValueError("LP carries integrality marks; use solve_ilp")
    return _solve_relaxation(lp, [])


def solve_ilp(lp: LinearProgram, node_budget: int = 100000) -> LpResult:
    """Best-first branch-and-bound over the exact LP relaxation.

    Raises ResourceLimitError when the node budget is exhausted before the
    optimum is proven; that is distinct from an infeasible outcome.
    """
    root = _solve_relaxation(lp, [])
    if root.status != OPTIMAL:
        return root
    direction = 1 if lp.sense == MIN else -1

    def key(result: LpResult) -> Fraction:
        return direction * result.objective

    def fractional_var(result: LpResult):
        for idx in sorted(lp.integral):
            if result.assignment[lp.variables[idx]].denominator != 1:
                return idx
        return None

    counter = 0
    heap = [(key(root), counter, [], root)]
    incumbent: LpResult | None = None
    explored = 0
    while heap:
        bound, _, extra, result = heapq.heappop(heap)
        if incumbent is not None and bound >= key(incumbent):
            continue
        explored += 1
        branch_idx = fractional_var(result)
        if branch_idx is None:
            if incumbent is None or key(result) < key(incumbent):
                incumbent = result
            continue
        if explored >= node_budget:
            raise ResourceLimitError(
                f"node budget {node_budget} exhausted with bound {result.objective}"
            )
        name = lp.variables[branch_idx]
        value = result.assignment[name]
        floor_v = Fraction(value.numerator // value.denominator)
        for sense, rhs in ((LESS_EQUAL, floor_v), (GREATER_EQUAL, floor_v + 1)):
            branch = extra + [
                Constraint(f"branch[{name}]{sense}{rhs}", {branch_idx: Fraction(1)}, sense, rhs)
            ]
            child = _solve_relaxation(lp, branch)
            if child.status != OPTIMAL:
                continue
            if incumbent is not None and key(child) >= key(incumbent):
                continue
            counter += 1
            heapq.heappush(heap, (key(child), counter, branch, child))
    if incumbent is None:
        return LpResult(status=INFEASIBLE, nodes_explored=explored, meta=dict(lp.meta))
    incumbent.nodes_explored = explored
    return incumbent
