import json

import pytest
from fractions import Fraction

from mincast.flowalg import (
    build_catalog,
    check_conservation,
    check_solution,
    witness_solution,
)
from mincast.netmodel import multicast_capacity, parse_network, random_network
from mincast.optimizer import (
    MAX_RATE,
    MIN_CODING_NODES,
    MIN_CODING_OPERATIONS,
    MIN_PACKETS_CODED,
    MIN_RESOURCE,
    Objective,
    OptimizerError,
    build_lp,
    extract_solution,
    optimize,
    solution_assignment,
)
from mincast.simplex import INFEASIBLE, OPTIMAL, solve_ilp, solve_lp

from oracles import (
    min_coding_ops_bruteforce_k2,
    min_packets_bruteforce_k2,
    packet_cost_k2_grid,
    steiner_packing_fractional,
    steiner_packing_integral,
)


def test_variable_census_butterfly(butterfly):
    cat = build_catalog(2)
    lp = build_lp(butterfly, cat, 2)
    # 9 edges x 3 sets + 7 nodes x (r, n) at the single collection
    assert lp.num_variables == 41
    assert sum(1 for name in lp.variables if name.startswith("x[")) == 27
    assert sum(1 for name in lp.variables if name.startswith("r[")) == 7
    assert sum(1 for name in lp.variables if name.startswith("n[")) == 7
    # the min-ops objective is exactly one unit coefficient per node's n
    objective_vars = {lp.variables[idx] for idx in lp.objective}
    assert objective_vars == {f"n[{v}][{cat.q_key(0)}]" for v in butterfly.node_ids}
    assert all(c == 1 for c in lp.objective.values())


def test_routing_only_adds_one_row_per_node(butterfly):
    cat = build_catalog(2)
    base = build_lp(butterfly, cat, 2)
    restricted = build_lp(butterfly, cat, 2, routing_only=frozenset(butterfly.node_ids))
    assert len(restricted.constraints) == len(base.constraints) + 7


def test_k1_has_no_node_variables():
    doc = {
        "nodes": [{"id": "s"}, {"id": "v"}, {"id": "t"}],
        "edges": [
            {"from": "s", "to": "v", "capacity": 2},
            {"from": "v", "to": "t", "capacity": 2},
        ],
        "source": "s",
        "receivers": ["t"],
    }
    net = parse_network(json.dumps(doc))
    cat = build_catalog(1)
    lp = build_lp(net, cat, 2)
    assert all(name.startswith("x[") for name in lp.variables)
    assert solve_lp(lp).status == OPTIMAL


def test_min_coding_ops_matches_bruteforce(butterfly):
    cat = build_catalog(2)
    res = solve_lp(build_lp(butterfly, cat, 2))
    assert res.status == OPTIMAL
    oracle = min_coding_ops_bruteforce_k2(butterfly, 2)
    assert res.objective == oracle == 1


def test_min_coding_ops_places_coding_at_merge_node(butterfly):
    cat = build_catalog(2)
    out = optimize(butterfly, Objective(MIN_CODING_OPERATIONS), h=2)
    sol = out.solution
    assert sol.total_coding() == 1
    assert sol.nodes["m"].n == {0: Fraction(1)}
    assert all(not nv.n for v, nv in sol.nodes.items() if v != "m")
    assert check_solution(butterfly, sol, cat) == []


def test_infeasible_beyond_capacity(butterfly):
    cat = build_catalog(2)
    assert solve_lp(build_lp(butterfly, cat, 3)).status == INFEASIBLE
    assert solve_lp(build_lp(butterfly, cat, Fraction(5, 2))).status == INFEASIBLE


def test_max_rate_routing_only_matches_steiner_packing(butterfly):
    out = optimize(butterfly, Objective(MAX_RATE), extra_routing_only=butterfly.node_ids)
    assert out.result.objective == Fraction(3, 2)
    assert steiner_packing_fractional(butterfly) == Fraction(3, 2)
    # with coding allowed the rate reaches the full multicast capacity
    full = optimize(butterfly, Objective(MAX_RATE))
    assert full.result.objective == 2


def test_integral_max_rate_routing_only(butterfly):
    out = optimize(
        butterfly, Objective(MAX_RATE), extra_routing_only=butterfly.node_ids, integral_rate=True
    )
    assert out.result.objective == 1
    assert steiner_packing_integral(butterfly) == 1


def test_min_resource_uniform_costs(butterfly):
    costs = {e.id: 1 for e in butterfly.edges}
    out = optimize(butterfly, Objective(MIN_RESOURCE, costs), h=2)
    assert out.result.objective == 9
    # objective equals total edge usage
    total = sum(sum(vec, Fraction(0)) for vec in out.solution.edges.values())
    assert total == 9


def test_min_resource_requires_all_costs(butterfly):
    cat = build_catalog(2)
    with pytest.raises(OptimizerError, match="s->a"):
        build_lp(butterfly, cat, 2, objective=Objective(MIN_RESOURCE, {"m->w": 1}))
    with pytest.raises(OptimizerError):
        build_lp(butterfly, cat, 2, objective=Objective(MIN_RESOURCE))


def test_min_packets_matches_grid_oracle(butterfly):
    out = optimize(butterfly, Objective(MIN_PACKETS_CODED), h=2)
    oracle = min_packets_bruteforce_k2(butterfly, 2)
    assert out.result.objective == oracle == 2


def test_packet_cost_single_node_example():
    # one coding unit with no replication available: both inputs converted
    assert packet_cost_k2_grid(-1) == 2
    # replication on site covers the coding inputs
    assert packet_cost_k2_grid(0) == 0
    assert packet_cost_k2_grid(2) == 0


def test_min_coding_nodes_butterfly(butterfly):
    out = optimize(butterfly, Objective(MIN_CODING_NODES), h=2)
    assert out.result.objective == 1
    coding_nodes = [v for v, nv in out.solution.nodes.items() if nv.n]
    assert coding_nodes == ["m"]


def test_min_coding_nodes_requires_integer_mode(butterfly):
    cat = build_catalog(2)
    lp = build_lp(butterfly, cat, 2, objective=Objective(MIN_CODING_NODES))
    with pytest.raises(ValueError):
        solve_lp(lp)
    assert solve_ilp(lp).status == OPTIMAL


def test_max_rate_needs_free_rate(butterfly):
    cat = build_catalog(2)
    with pytest.raises(OptimizerError):
        build_lp(butterfly, cat, 2, objective=Objective(MAX_RATE))


def test_unknown_objective_rejected():
    with pytest.raises(OptimizerError):
        Objective("min_entropy")


def test_extract_requires_optimal(butterfly):
    cat = build_catalog(2)
    res = solve_lp(build_lp(butterfly, cat, 3))
    with pytest.raises(ValueError):
        extract_solution(res, butterfly, cat)


def test_extract_zero_rate(butterfly):
    cat = build_catalog(2)
    out = optimize(butterfly, Objective(MIN_CODING_OPERATIONS), h=0)
    assert out.result.objective == 0
    assert out.solution.h == 0
    assert out.solution.edges == {}
    assert out.solution.nodes == {}


def test_extract_normalizes_common_part(butterfly):
    cat = build_catalog(2)
    out = optimize(butterfly, Objective(MIN_CODING_OPERATIONS), h=2)
    res = out.result
    # graft a junk pair onto the optimal assignment and re-extract
    res.assignment["r[w][{1}|{2}]"] += 5
    res.assignment["n[w][{1}|{2}]"] += 5
    sol = extract_solution(res, butterfly, cat)
    assert sol.nodes["w"].r == {0: Fraction(1)}
    assert sol.nodes["w"].n == {}


def test_witness_is_lp_feasible_on_randoms():
    for seed in range(15):
        K = [1, 2, 3][seed % 3]
        net = random_network(seed, 8, K)
        cat = build_catalog(K)
        h = int(multicast_capacity(net))
        lp = build_lp(net, cat, h)
        witness = witness_solution(net, cat, h)
        point = solution_assignment(witness, net, cat)
        assert lp.point_violations(point) == []
        assert solve_lp(build_lp(net, cat, h + 1)).status == INFEASIBLE


def test_min_ops_monotone_under_capacity_increase(butterfly_text):
    base_doc = json.loads(butterfly_text)
    base_value = optimize(
        parse_network(json.dumps(base_doc)), Objective(MIN_CODING_OPERATIONS), h=2
    ).result.objective
    for idx in range(len(base_doc["edges"])):
        doc = json.loads(butterfly_text)
        doc["edges"][idx]["capacity"] = 2
        bigger = optimize(
            parse_network(json.dumps(doc)), Objective(MIN_CODING_OPERATIONS), h=2
        ).result.objective
        assert bigger <= base_value


def test_min_nodes_zero_iff_min_ops_zero():
    for seed in range(8):
        net = random_network(seed, 7, 2)
        h = int(multicast_capacity(net))
        ops = optimize(net, Objective(MIN_CODING_OPERATIONS), h=h).result.objective
        nodes = optimize(net, Objective(MIN_CODING_NODES), h=h).result.objective
        assert (ops == 0) == (nodes == 0)


def test_receiver_can_relay_to_another_receiver():
    # s -> r1 -> r2 with both nodes receiving: r1 keeps its copy and forwards
    doc = {
        "nodes": [{"id": "s"}, {"id": "r1"}, {"id": "r2"}],
        "edges": [
            {"from": "s", "to": "r1", "capacity": 1},
            {"from": "r1", "to": "r2", "capacity": 1},
        ],
        "source": "s",
        "receivers": ["r1", "r2"],
    }
    net = parse_network(json.dumps(doc))
    assert multicast_capacity(net) == 1
    out = optimize(net, Objective(MIN_CODING_OPERATIONS), h=1)
    assert out.result.objective == 0
    sol = out.solution
    cat = out.catalog
    assert sol.edges["s->r1"] == (Fraction(0), Fraction(0), Fraction(1))
    assert sol.edges["r1->r2"] == (Fraction(0), Fraction(1), Fraction(0))
    assert sol.nodes["r1"].r == {0: Fraction(1)}
    witness = witness_solution(net, cat, 1)
    assert check_solution(net, witness, cat) == []


def test_fractional_capacities_solve_exactly():
    doc = {
        "nodes": [{"id": "s"}, {"id": "t"}],
        "edges": [
            {"from": "s", "to": "t", "capacity": "1/3"},
            {"from": "s", "to": "t", "capacity": "1/6"},
        ],
        "source": "s",
        "receivers": ["t"],
    }
    net = parse_network(json.dumps(doc))
    out = optimize(net, Objective(MAX_RATE))
    assert out.result.objective == Fraction(1, 2)


def test_k4_star_smoke():
    doc = {
        "nodes": [{"id": "s"}] + [{"id": f"t{i}"} for i in range(1, 5)],
        "edges": [{"from": "s", "to": f"t{i}", "capacity": 1} for i in range(1, 5)],
        "source": "s",
        "receivers": [f"t{i}" for i in range(1, 5)],
    }
    net = parse_network(json.dumps(doc))
    out = optimize(net, Objective(MIN_CODING_OPERATIONS), h=1)
    assert out.result.objective == 0
    assert out.lp.num_variables == 4 * 15 + 5 * 2 * 36


def test_solution_documents_roundtrip_through_solver(butterfly):
    from mincast.flowalg import dump_solution, load_solution

    out = optimize(butterfly, Objective(MIN_CODING_OPERATIONS), h=2)
    text = dump_solution(out.solution, out.catalog)
    loaded = load_solution(text, out.catalog)
    assert check_solution(butterfly, loaded, out.catalog) == []
    assert check_conservation(butterfly, loaded, out.catalog) == []


def test_lp_dump_roundtrip_smoke(butterfly):
    cat = build_catalog(2)
    lp = build_lp(butterfly, cat, 2)
    text = lp.dump()
    assert "Subject To" in text and "cap[s->a]" in text.replace("cap[s->a]", "cap[s->a]")
    assert text.count("v0") >= 2
