"""Builds and solves the multicast information-flow program with its cost objectives.

The constraint set is: nonnegative flow vector entries and node variables,
per-edge capacity rows, the node balance at every node (source injection and
receiver absorption included), the source and receiver rate rows, and n = 0
at routing-only nodes. Five objectives are supported:

* ``min_coding_operations``: total coding amount, sum of all n variables.
* ``min_packets_coded``: the conjectured packet-conversion count, linearized
  exactly with per-node lambda/mu/t auxiliaries.
* ``min_resource``: linear per-edge costs applied to total edge usage.
* ``max_rate``: maximize the common rate h.
* ``min_coding_nodes``: count of nodes that code at all, via big-M binary
  indicators (integer mode).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .flowalg import (
    Catalog,
    FlowSolution,
    NodeVars,
    build_catalog,
    check_solution,
)
from .netmodel import Network, parse_rational
from .simplex import (
    GREATER_EQUAL,
    LESS_EQUAL,
    EQUAL,
    MAX,
    MIN,
    OPTIMAL,
    LinearProgram,
    LpResult,
    SolverError,
    solve_ilp,
    solve_lp,
)

MIN_CODING_OPERATIONS = "min_coding_operations"
MIN_PACKETS_CODED = "min_packets_coded"
MIN_RESOURCE = "min_resource"
MAX_RATE = "max_rate"
MIN_CODING_NODES = "min_coding_nodes"
OBJECTIVE_KINDS = (
    MIN_CODING_OPERATIONS,
    MIN_PACKETS_CODED,
    MIN_RESOURCE,
    MAX_RATE,
    MIN_CODING_NODES,
)

FREE = "free"


class OptimizerError(ValueError):
    """Unsupported objective/feature combination or missing cost data."""


@dataclass(frozen=True)
class Objective:
    """Cost criterion; ``edge_costs`` is required for min_resource only."""

    kind: str
    edge_costs: Mapping[str, Fraction] | None = None

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise OptimizerError(f"unknown objective kind {self.kind!r}")


def x_name(eid: str, set_key: str) -> str:
    return f"x[{eid}][{set_key}]"


def r_name(v: str, q_key: str) -> str:
    return f"r[{v}][{q_key}]"


def n_name(v: str, q_key: str) -> str:
    return f"n[{v}][{q_key}]"


def build_lp(
    net: Network,
    cat: Catalog,
    h,
    routing_only=frozenset(),
    objective: Objective = Objective(MIN_CODING_OPERATIONS),
) -> LinearProgram:
    """Emit the constraint rows plus the requested objective.

    ``h`` is a fixed rational rate, or FREE (None) to leave the rate as a
    decision variable; max_rate requires a free rate.
    """
    if net.K != cat.k:
        raise OptimizerError(f"network has {net.K} receivers but catalog is for {cat.k}")
    free_rate = h is None or h == FREE
    if objective.kind == MAX_RATE and not free_rate:
        raise OptimizerError("max_rate requires the rate h to be free")
    h_val = None
    if not free_rate:
        h_val = parse_rational(h)
        if h_val < 0:
            raise OptimizerError(f"rate must be nonnegative, got {h_val}")
    for v in routing_only:
        if v not in net.kind:
            raise OptimizerError(f"routing-only node {v!r} not in network")

    lp = LinearProgram()
    for e in net.edges:
        for i in range(cat.size):
            lp.add_variable(x_name(e.id, cat.set_key(i)))
    for v in net.node_ids:
        for j in range(len(cat.collections)):
            lp.add_variable(r_name(v, cat.q_key(j)))
            lp.add_variable(n_name(v, cat.q_key(j)))
    if free_rate:
        lp.add_variable("h")

    for e in net.edges:
        coeffs = {x_name(e.id, cat.set_key(i)): 1 for i in range(cat.size)}
        lp.add_constraint(coeffs, LESS_EQUAL, e.capacity, name=f"cap[{e.id}]")

    for v in net.node_ids:
        for i in range(cat.size):
            coeffs: dict[str, Fraction] = {}
            for e in net.out_edges(v):
                name = x_name(e.id, cat.set_key(i))
                coeffs[name] = coeffs.get(name, Fraction(0)) + 1
            for e in net.in_edges(v):
                name = x_name(e.id, cat.set_key(i))
                coeffs[name] = coeffs.get(name, Fraction(0)) - 1
            for j in cat.member_of[i]:
                coeffs[r_name(v, cat.q_key(j))] = Fraction(-1)
                coeffs[n_name(v, cat.q_key(j))] = Fraction(1)
            for j in cat.union_of[i]:
                coeffs[r_name(v, cat.q_key(j))] = Fraction(1)
                coeffs[n_name(v, cat.q_key(j))] = Fraction(-1)
            shift = Fraction(0)
            if v == net.source and i == cat.full_index:
                shift = Fraction(1)
            elif v in net.receivers and i == cat.singleton_index[net.receiver_label(v) - 1]:
                shift = Fraction(-1)
            if free_rate:
                if shift:
                    coeffs["h"] = -shift
                lp.add_constraint(coeffs, EQUAL, 0, name=f"node[{v}][{cat.set_key(i)}]")
            else:
                lp.add_constraint(
                    coeffs, EQUAL, shift * h_val, name=f"node[{v}][{cat.set_key(i)}]"
                )

    for k in range(1, cat.k + 1):
        out_terms: dict[str, Fraction] = {}
        for e in net.out_edges(net.source):
            for i in cat.containing[k - 1]:
                name = x_name(e.id, cat.set_key(i))
                out_terms[name] = out_terms.get(name, Fraction(0)) + 1
        in_terms: dict[str, Fraction] = {}
        for e in net.in_edges(net.receivers[k - 1]):
            for i in cat.containing[k - 1]:
                name = x_name(e.id, cat.set_key(i))
                in_terms[name] = in_terms.get(name, Fraction(0)) + 1
        if free_rate:
            out_terms["h"] = Fraction(-1)
            in_terms["h"] = Fraction(-1)
            lp.add_constraint(out_terms, EQUAL, 0, name=f"source-rate[{k}]")
            lp.add_constraint(in_terms, EQUAL, 0, name=f"receiver-rate[{k}]")
        else:
            lp.add_constraint(out_terms, EQUAL, h_val, name=f"source-rate[{k}]")
            lp.add_constraint(in_terms, EQUAL, h_val, name=f"receiver-rate[{k}]")

    for v in sorted(routing_only):
        for j in range(len(cat.collections)):
            lp.add_constraint(
                {n_name(v, cat.q_key(j)): 1}, EQUAL, 0, name=f"routing[{v}][{cat.q_key(j)}]"
            )

    coeffs, sense = build_objective(lp, net, cat, objective)
    lp.set_objective(coeffs, sense)
    lp.meta = {
        "h": FREE if free_rate else h_val,
        "routing_only": frozenset(routing_only),
        "objective": objective.kind,
    }
    return lp


def build_objective(lp: LinearProgram, net: Network, cat: Catalog, objective: Objective):
    """Attach auxiliary variables/rows for the objective; returns (coeffs, sense)."""
    kind = objective.kind
    if kind == MIN_CODING_OPERATIONS:
        return (
            {n_name(v, cat.q_key(j)): 1 for v in net.node_ids for j in range(len(cat.collections))},
            MIN,
        )

    if kind == MIN_PACKETS_CODED:
        # t[v][i] >= A_i^v with the inner max over lambda replaced by mu[v][j];
        # mu enters the t rows positively, so minimization presses it onto the
        # true maximum and the relaxation is exact.
        coeffs = {}
        for v in net.node_ids:
            lam = {}
            for j in range(len(cat.collections)):
                for i in cat.collections[j]:
                    name = f"lam[{v}][{cat.set_key(i)}][{cat.q_key(j)}]"
                    lp.add_variable(name)
                    lam[(i, j)] = name
                    lp.add_constraint(
                        {name: 1, r_name(v, cat.q_key(j)): -1},
                        LESS_EQUAL,
                        0,
                        name=f"lam-cap[{v}][{cat.set_key(i)}][{cat.q_key(j)}]",
                    )
            mu = {}
            for j in range(len(cat.collections)):
                name = f"mu[{v}][{cat.q_key(j)}]"
                lp.add_variable(name)
                mu[j] = name
                for i in cat.collections[j]:
                    lp.add_constraint(
                        {lam[(i, j)]: 1, name: -1},
                        LESS_EQUAL,
                        0,
                        name=f"mu-env[{v}][{cat.set_key(i)}][{cat.q_key(j)}]",
                    )
            for i in range(cat.size):
                if not cat.member_of[i] and not cat.union_of[i]:
                    continue
                t = f"t[{v}][{cat.set_key(i)}]"
                lp.add_variable(t)
                coeffs[t] = 1
                row = {t: Fraction(1)}
                for j in cat.member_of[i]:
                    row[n_name(v, cat.q_key(j))] = row.get(n_name(v, cat.q_key(j)), Fraction(0)) - 1
                    row[lam[(i, j)]] = row.get(lam[(i, j)], Fraction(0)) + 1
                for j in cat.union_of[i]:
                    row[mu[j]] = row.get(mu[j], Fraction(0)) - 1
                    row[n_name(v, cat.q_key(j))] = row.get(n_name(v, cat.q_key(j)), Fraction(0)) + 1
                lp.add_constraint(row, GREATER_EQUAL, 0, name=f"t-bound[{v}][{cat.set_key(i)}]")
        return coeffs, MIN

    if kind == MIN_RESOURCE:
        if objective.edge_costs is None:
            raise OptimizerError("min_resource requires per-edge cost coefficients")
        coeffs = {}
        for e in net.edges:
            if e.id not in objective.edge_costs:
                raise OptimizerError(f"missing cost coefficient for edge {e.id!r}")
            c = parse_rational(objective.edge_costs[e.id])
            for i in range(cat.size):
                coeffs[x_name(e.id, cat.set_key(i))] = c
        return coeffs, MIN

    if kind == MAX_RATE:
        return {"h": 1}, MAX

    if kind == MIN_CODING_NODES:
        big_m = net.total_capacity
        coeffs = {}
        for v in net.node_ids:
            y = f"y[{v}]"
            lp.add_variable(y, integral=True)
            coeffs[y] = 1
            row = {n_name(v, cat.q_key(j)): Fraction(1) for j in range(len(cat.collections))}
            row[y] = -big_m
            lp.add_constraint(row, LESS_EQUAL, 0, name=f"bigM[{v}]")
            lp.add_constraint({y: 1}, LESS_EQUAL, 1, name=f"bin[{v}]")
        return coeffs, MIN

    raise OptimizerError(f"unknown objective kind {kind!r}")


def extract_solution(res: LpResult, net: Network, cat: Catalog) -> FlowSolution:
    """Map an optimal assignment back to a FlowSolution and normalize r/n.

    For every node and collection the common part min(r_j, n_j) is subtracted
    from both variables; only the difference matters to the node balance and
    the normalization never increases any implemented objective. The result
    is re-checked against the full constraint set.
    """
    if res.status != OPTIMAL:
        raise ValueError(f"cannot extract from a result with status {res.status!r}")
    h = res.meta.get("h")
    if h == FREE or h is None:
        h = res.assignment.get("h", Fraction(0))
    edges = {}
    for e in net.edges:
        vec = tuple(
            res.assignment.get(x_name(e.id, cat.set_key(i)), Fraction(0))
            for i in range(cat.size)
        )
        if any(vec):
            edges[e.id] = vec
    nodes = {}
    for v in net.node_ids:
        nv = NodeVars()
        for j in range(len(cat.collections)):
            r = res.assignment.get(r_name(v, cat.q_key(j)), Fraction(0))
            n = res.assignment.get(n_name(v, cat.q_key(j)), Fraction(0))
            common = min(r, n)
            r, n = r - common, n - common
            if r:
                nv.r[j] = r
            if n:
                nv.n[j] = n
        if not nv.is_zero():
            nodes[v] = nv
    sol = FlowSolution(Fraction(h), edges, nodes)
    problems = check_solution(net, sol, cat, res.meta.get("routing_only", frozenset()))
    if problems:
        raise SolverError(
            "extracted solution failed validation: " + "; ".join(str(p) for p in problems)
        )
    return sol


def solution_assignment(sol: FlowSolution, net: Network, cat: Catalog) -> dict:
    """Express a FlowSolution as an LP assignment (for feasibility plug-in)."""
    point = {}
    for eid, vec in sol.edges.items():
        for i, value in enumerate(vec):
            if value:
                point[x_name(eid, cat.set_key(i))] = value
    for v, nv in sol.nodes.items():
        for j, value in nv.r.items():
            point[r_name(v, cat.q_key(j))] = value
        for j, value in nv.n.items():
            point[n_name(v, cat.q_key(j))] = value
    return point


@dataclass
class OptimizeOutcome:
    """Bundle of the LP, its result, and the extracted solution (if optimal)."""

    lp: LinearProgram
    result: LpResult
    solution: FlowSolution | None
    catalog: Catalog


def optimize(
    net: Network,
    objective: Objective,
    h=FREE,
    extra_routing_only=(),
    integral_rate: bool = False,
    node_budget: int = 100000,
) -> OptimizeOutcome:
    """One-call pipeline: catalog, LP, solve (ILP when marks exist), extract.

    Routing-only restrictions come from the network document's node kinds
    plus any node ids passed explicitly.
    """
    cat = build_catalog(net.K)
    routing_only = frozenset(net.routing_nodes) | frozenset(extra_routing_only)
    lp = build_lp(net, cat, h, routing_only, objective)
    if integral_rate:
        try:
            lp.integral.add(lp.variable_index("h"))
        except KeyError:
            raise OptimizerError("integral rate requires a free rate") from None
    res = solve_ilp(lp, node_budget) if lp.integral else solve_lp(lp)
    sol = extract_solution(res, net, cat) if res.status == OPTIMAL else None
    return OptimizeOutcome(lp, res, sol, cat)
