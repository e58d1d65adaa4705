"""Command-line front end: capacity, solve, construct, verify, check, export-dot.

Exit status: 0 on success, 1 when the instance is infeasible or a solution or
code is invalid, 2 on usage and document-parse errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from .codegen import (
    CodegenError,
    FieldSpec,
    assign_code,
    code_report,
    expand_gadgets,
    gadget_dot,
    network_dot,
    remove_cycles,
    verify_code,
)
from .flowalg import (
    build_catalog,
    check_conservation,
    check_solution,
    dump_solution,
    load_solution,
    scale_network,
    scale_solution,
    time_instances,
)
from .netmodel import (
    InfeasibleRateError,
    NetworkError,
    NonIntegralError,
    format_rational,
    load_network,
    max_flow,
    multicast_capacity,
    parse_rational,
)
from .optimizer import (
    MAX_RATE,
    MIN_CODING_NODES,
    MIN_CODING_OPERATIONS,
    MIN_PACKETS_CODED,
    MIN_RESOURCE,
    Objective,
    OptimizerError,
    optimize,
)
from .simplex import OPTIMAL, ResourceLimitError

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2

DEFAULT_SEED = 1729  # fixed, never time-derived: fixtures must be stable

OBJECTIVE_NAMES = {
    "min-coding-ops": MIN_CODING_OPERATIONS,
    "min-packets-coded": MIN_PACKETS_CODED,
    "min-resource": MIN_RESOURCE,
    "max-rate": MAX_RATE,
    "min-coding-nodes": MIN_CODING_NODES,
}


class UsageError(ValueError):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mincast",
        description="Minimum-cost network coding for single-source multicast.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", help="per-receiver max-flows and the multicast capacity")
    p.add_argument("network")
    p.add_argument("--output", help="write a JSON report here")

    p = sub.add_parser("solve", help="solve one of the cost objectives")
    _solve_flags(p)
    p.add_argument("--output", help="write the solution document here")
    p.add_argument("--lp-dump", help="write the LP interchange dump here")

    p = sub.add_parser("construct", help="build and verify an explicit multicast code")
    _solve_flags(p)
    p.add_argument("--solution", help="use this solution document instead of solving")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="matching/coding seed")
    p.add_argument("--field-degree", type=int, default=16, help="GF(2^m) extension degree")
    p.add_argument("--output", help="write the code report here")
    p.add_argument("--gadget-dot", help="write the gadget graph in DOT here")

    p = sub.add_parser("verify", help="re-check a solution document against a network")
    p.add_argument("network")
    p.add_argument("--solution", required=True)
    p.add_argument("--routing-only", default="", help="comma list of node ids, or ALL")

    p = sub.add_parser("check", help="validate a network document")
    p.add_argument("network")

    p = sub.add_parser("export-dot", help="annotated DOT of the network")
    p.add_argument("network")
    p.add_argument("--solution", help="annotate with this solution document")
    p.add_argument("--output")

    return parser


def _solve_flags(p: argparse.ArgumentParser):
    p.add_argument("network")
    p.add_argument(
        "--objective",
        choices=sorted(OBJECTIVE_NAMES),
        default=None,
        help="cost criterion (default min-coding-ops; max-rate when --rate max)",
    )
    p.add_argument(
        "--rate",
        default=None,
        help='fixed rational rate, or "max" (default: the multicast capacity)',
    )
    p.add_argument("--routing-only", default="", help="comma list of node ids, or ALL")
    p.add_argument("--edge-costs", help="JSON file {edgeId: rational} for min-resource")
    p.add_argument(
        "--integral-rate",
        action="store_true",
        help="with --rate max: restrict the rate to integers (branch and bound)",
    )


def _routing_set(net, raw: str) -> frozenset:
    raw = (raw or "").strip()
    if not raw:
        return frozenset()
    if raw == "ALL":
        return frozenset(net.node_ids)
    nodes = frozenset(part.strip() for part in raw.split(",") if part.strip())
    for v in nodes:
        if v not in net.kind:
            raise UsageError(f"--routing-only names unknown node {v!r}")
    return nodes


def _load_edge_costs(net, path: str | None):
    if path is None:
        return {e.id: 1 for e in net.edges}
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return {str(k): parse_rational(v) for k, v in raw.items()}


def _solve(args, net):
    objective_name = args.objective
    rate = args.rate
    if rate == "max" and objective_name is None:
        objective_name = "max-rate"
    if objective_name is None:
        objective_name = "min-coding-ops"
    kind = OBJECTIVE_NAMES[objective_name]
    if kind == MAX_RATE:
        if rate not in (None, "max"):
            raise UsageError('--objective max-rate requires --rate max (or no --rate)')
        h = None
    else:
        if rate == "max":
            raise UsageError('--rate max requires --objective max-rate')
        h = parse_rational(rate) if rate is not None else multicast_capacity(net)
    if args.integral_rate and kind != MAX_RATE:
        raise UsageError("--integral-rate only applies to --objective max-rate")
    costs = _load_edge_costs(net, args.edge_costs) if kind == MIN_RESOURCE else None
    objective = Objective(kind, edge_costs=costs)
    routing = _routing_set(net, args.routing_only)
    return optimize(
        net, objective, h=h, extra_routing_only=routing, integral_rate=args.integral_rate
    )


def _write(path: str | None, text: str):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def cmd_capacity(args) -> int:
    net = load_network(args.network)
    report = {"receivers": {}, "capacity": None}
    for k, rid in enumerate(net.receivers, start=1):
        flow = max_flow(net, rid)
        report["receivers"][str(k)] = {"node": rid, "max_flow": format_rational(flow)}
        print(f"receiver {k} ({rid}): max-flow {format_rational(flow)}")
    cap = multicast_capacity(net)
    report["capacity"] = format_rational(cap)
    print(f"multicast capacity: {format_rational(cap)}")
    if args.output:
        _write(args.output, json.dumps(report, indent=2) + "\n")
    return EXIT_OK


def cmd_solve(args) -> int:
    net = load_network(args.network)
    outcome = _solve(args, net)
    res = outcome.result
    if res.status != OPTIMAL:
        print(res.status)
        return EXIT_INVALID
    sol = outcome.solution
    instances = time_instances(sol)
    print("status: optimal")
    print(f"objective ({res.meta['objective']}): {format_rational(res.objective)}")
    print(f"rate h: {format_rational(sol.h)}")
    if instances > 1:
        print(f"time instances required: {instances}")
    if res.meta["objective"] == MIN_PACKETS_CODED:
        print("note: packet count uses the conjectured cost function")
    if args.output:
        _write(args.output, dump_solution(sol, outcome.catalog) + "\n")
    if args.lp_dump:
        _write(args.lp_dump, outcome.lp.dump())
    return EXIT_OK


def cmd_construct(args) -> int:
    net = load_network(args.network)
    cat = build_catalog(net.K)
    routing = _routing_set(net, args.routing_only) | net.routing_nodes
    if args.solution:
        with open(args.solution, "r", encoding="utf-8") as fh:
            sol = load_solution(fh.read(), cat)
    else:
        outcome = _solve(args, net)
        if outcome.result.status != OPTIMAL:
            print(outcome.result.status)
            return EXIT_INVALID
        sol = outcome.solution
    problems = check_solution(net, sol, cat, routing) + check_conservation(net, sol, cat)
    if problems:
        print("solution rejected:")
        for p in problems:
            print(f"  {p}")
        return EXIT_INVALID
    if not net.is_acyclic():
        print("construction requires an acyclic network")
        return EXIT_INVALID
    instances = time_instances(sol)
    work_net, work_sol = net, sol
    if instances > 1:
        work_net = scale_network(net, instances)
        work_sol = scale_solution(sol, instances)
    graph = expand_gadgets(work_net, work_sol, cat, args.seed)
    graph = remove_cycles(graph)
    h = int(work_sol.h)
    coded = assign_code(graph, h, FieldSpec(args.field_degree, args.seed))
    verdict = verify_code(coded, h)
    report = code_report(coded, verdict)
    report["time_instances"] = instances
    for label, entry in sorted(verdict["receivers"].items()):
        status = "ok" if entry["valid"] else "RANK DEFICIENT"
        print(f"receiver {label}: rank {entry['rank']} of {entry['required']} ({status})")
    if args.output:
        _write(args.output, json.dumps(report, indent=2) + "\n")
    if args.gadget_dot:
        _write(args.gadget_dot, gadget_dot(graph))
    return EXIT_OK if verdict["valid"] else EXIT_INVALID


def cmd_verify(args) -> int:
    net = load_network(args.network)
    cat = build_catalog(net.K)
    routing = _routing_set(net, args.routing_only) | net.routing_nodes
    with open(args.solution, "r", encoding="utf-8") as fh:
        sol = load_solution(fh.read(), cat)
    problems = check_solution(net, sol, cat, routing) + check_conservation(net, sol, cat)
    if problems:
        for p in problems:
            print(p)
        print(f"{len(problems)} violation(s)")
        return EXIT_INVALID
    print("solution is valid")
    return EXIT_OK


def cmd_check(args) -> int:
    net = load_network(args.network)
    print(
        f"valid network: {len(net.node_ids)} nodes, {len(net.edges)} edges, "
        f"{net.K} receiver(s), source {net.source!r}"
    )
    return EXIT_OK


def cmd_export_dot(args) -> int:
    net = load_network(args.network)
    sol = None
    cat = None
    if args.solution:
        cat = build_catalog(net.K)
        with open(args.solution, "r", encoding="utf-8") as fh:
            sol = load_solution(fh.read(), cat)
    _write(args.output, network_dot(net, sol, cat))
    return EXIT_OK


_HANDLERS = {
    "capacity": cmd_capacity,
    "solve": cmd_solve,
    "construct": cmd_construct,
    "verify": cmd_verify,
    "check": cmd_check,
    "export-dot": cmd_export_dot,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return _HANDLERS[args.command](args)
    except (NetworkError, UsageError, OptimizerError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleRateError, NonIntegralError, CodegenError, ResourceLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
