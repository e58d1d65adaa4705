"""Receiver-set catalogs, information-flow vectors, and node-constraint algebra.

An information flow vector assigns to each nonempty receiver subset P_i the
rate of data on an edge that is needed by exactly that subset. A node turns
its incoming vector into its outgoing one through replication variables r_j
(split a packet for the union of a disjoint collection Q_j into one copy per
member) and coding variables n_j (merge one packet per member into a packet
for the union). The source injects h units labeled with the full receiver
set; each receiver absorbs h units labeled with its own singleton.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import lcm

from .netmodel import (
    Network,
    format_rational,
    parse_rational,
    expand_and_decompose,
    PathSet,
    UnitExpansion,
)

MAX_RECEIVERS = 6  # |Q| grows exponentially; desk scale stops here


class CatalogError(ValueError):
    """Receiver count outside the supported range."""


class ConservationError(ValueError):
    """Per-receiver flow conservation violated where it is required."""


def _set_partitions(items: tuple[int, ...]):
    """Yield all partitions of ``items`` as tuples of blocks."""
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for partition in _set_partitions(rest):
        yield ((first,),) + partition
        for idx, block in enumerate(partition):
            yield partition[:idx] + ((first,) + block,) + partition[idx + 1:]


@dataclass(frozen=True)
class Catalog:
    """Fixed-order catalogs of receiver subsets (P) and disjoint collections (Q).

    ``sets`` lists the 2^K - 1 nonempty subsets of {1..K} ordered by
    cardinality then lexicographically; ``collections`` lists every family of
    two or more pairwise disjoint members of P, each family as a sorted tuple
    of P-indices, ordered lexicographically by that tuple.
    """

    k: int
    sets: tuple[frozenset, ...]
    index_of: dict
    collections: tuple[tuple[int, ...], ...]
    collection_index: dict
    union_index: tuple[int, ...]
    member_of: tuple[tuple[int, ...], ...]
    union_of: tuple[tuple[int, ...], ...]
    containing: tuple[tuple[int, ...], ...]
    singleton_index: tuple[int, ...]
    full_index: int
    singleton_collection: dict

    @property
    def size(self) -> int:
        return len(self.sets)

    def set_key(self, i: int) -> str:
        return ",".join(str(m) for m in sorted(self.sets[i]))

    def parse_set_key(self, key: str) -> int:
        try:
            members = frozenset(int(part) for part in key.split(","))
            return self.index_of[members]
        except (ValueError, KeyError):
            raise KeyError(f"unknown receiver-set key {key!r}") from None

    def q_key(self, j: int) -> str:
        return "|".join("{" + self.set_key(i) + "}" for i in self.collections[j])

    def parse_q_key(self, key: str) -> int:
        try:
            parts = tuple(sorted(self.parse_set_key(p.strip("{}")) for p in key.split("|")))
            return self.collection_index[parts]
        except (KeyError, ValueError):
            raise KeyError(f"unknown collection key {key!r}") from None


def build_catalog(K: int) -> Catalog:
    """Enumerate P and Q for K receivers with deterministic ordering."""
    if not 1 <= K <= MAX_RECEIVERS:
        raise CatalogError(f"receiver count {K} outside 1..{MAX_RECEIVERS}")
    sets = []
    for size in range(1, K + 1):
        for combo in combinations(range(1, K + 1), size):
            sets.append(frozenset(combo))
    index_of = {s: i for i, s in enumerate(sets)}

    collections = set()
    for i, union_set in enumerate(sets):
        if len(union_set) < 2:
            continue
        for partition in _set_partitions(tuple(sorted(union_set))):
            if len(partition) < 2:
                continue
            collections.add(tuple(sorted(index_of[frozenset(b)] for b in partition)))
    ordered = tuple(sorted(collections))

    union_index = tuple(
        index_of[frozenset().union(*(sets[i] for i in coll))] for coll in ordered
    )
    member_of = [[] for _ in sets]
    union_of = [[] for _ in sets]
    for j, coll in enumerate(ordered):
        for i in coll:
            member_of[i].append(j)
        union_of[union_index[j]].append(j)

    containing = tuple(
        tuple(i for i, s in enumerate(sets) if k in s) for k in range(1, K + 1)
    )
    singleton_index = tuple(index_of[frozenset([k])] for k in range(1, K + 1))
    collection_index = {c: j for j, c in enumerate(ordered)}
    singleton_collection = {}
    for i, s in enumerate(sets):
        if len(s) >= 2:
            singleton_collection[i] = collection_index[
                tuple(sorted(index_of[frozenset([m])] for m in s))
            ]

    return Catalog(
        k=K,
        sets=tuple(sets),
        index_of=index_of,
        collections=ordered,
        collection_index=collection_index,
        union_index=union_index,
        member_of=tuple(tuple(js) for js in member_of),
        union_of=tuple(tuple(js) for js in union_of),
        containing=containing,
        singleton_index=singleton_index,
        full_index=index_of[frozenset(range(1, K + 1))],
        singleton_collection=singleton_collection,
    )


# ---------------------------------------------------------------------------
# Information flow vectors
# ---------------------------------------------------------------------------

def zero_vector(cat: Catalog) -> tuple[Fraction, ...]:
    return (Fraction(0),) * cat.size


def unit_vector(cat: Catalog, members, amount=Fraction(1)) -> tuple[Fraction, ...]:
    """Vector that is ``amount`` on the given receiver set and zero elsewhere."""
    i = cat.index_of[frozenset(members)]
    return tuple(
        parse_rational(amount) if idx == i else Fraction(0) for idx in range(cat.size)
    )


def make_vector(cat: Catalog, entries) -> tuple[Fraction, ...]:
    """Normalize a sequence of rationals into an information flow vector."""
    values = tuple(parse_rational(v) for v in entries)
    if len(values) != cat.size:
        raise ValueError(f"vector length {len(values)}, expected {cat.size}")
    return values


def add_vectors(a, b) -> tuple[Fraction, ...]:
    return tuple(x + y for x, y in zip(a, b))


def scale_vector(c, v) -> tuple[Fraction, ...]:
    c = parse_rational(c)
    return tuple(c * x for x in v)


def i_k(x, k: int, cat: Catalog) -> Fraction:
    """Flow carried toward receiver k: the sum over sets containing k."""
    if not 1 <= k <= cat.k:
        raise ValueError(f"receiver index {k} outside 1..{cat.k}")
    return sum((x[i] for i in cat.containing[k - 1]), Fraction(0))


# ---------------------------------------------------------------------------
# Solutions
# ---------------------------------------------------------------------------

@dataclass
class NodeVars:
    """Sparse replication (r) and coding (n) variables keyed by Q-index."""

    r: dict = field(default_factory=dict)
    n: dict = field(default_factory=dict)

    def r_at(self, j: int) -> Fraction:
        return self.r.get(j, Fraction(0))

    def n_at(self, j: int) -> Fraction:
        return self.n.get(j, Fraction(0))

    def total_coding(self) -> Fraction:
        return sum(self.n.values(), Fraction(0))

    def is_zero(self) -> bool:
        return not any(self.r.values()) and not any(self.n.values())


@dataclass
class FlowSolution:
    """Rate h plus per-edge vectors and per-node variables."""

    h: Fraction
    edges: dict
    nodes: dict

    def edge_vector(self, eid: str, cat: Catalog) -> tuple[Fraction, ...]:
        return self.edges.get(eid, zero_vector(cat))

    def node_vars(self, v: str) -> NodeVars:
        return self.nodes.get(v, NodeVars())

    def total_coding(self) -> Fraction:
        return sum((nv.total_coding() for nv in self.nodes.values()), Fraction(0))


def x_in(net: Network, sol: FlowSolution, cat: Catalog, v: str) -> tuple[Fraction, ...]:
    vec = zero_vector(cat)
    for e in net.in_edges(v):
        vec = add_vectors(vec, sol.edge_vector(e.id, cat))
    return vec


def x_out(net: Network, sol: FlowSolution, cat: Catalog, v: str) -> tuple[Fraction, ...]:
    vec = zero_vector(cat)
    for e in net.out_edges(v):
        vec = add_vectors(vec, sol.edge_vector(e.id, cat))
    return vec


def node_shift(net: Network, cat: Catalog, v: str, h) -> tuple[Fraction, ...]:
    """Rate injected (positive) or absorbed (negative) at v, as a vector.

    The source generates h units labeled with the full receiver set; receiver
    k terminates h units labeled {k}. These terms make the node balance hold
    at every node of the network, terminals included.
    """
    h = parse_rational(h)
    if v == net.source:
        return unit_vector(cat, frozenset(range(1, cat.k + 1)), h)
    if v in net.receivers:
        return scale_vector(-1, unit_vector(cat, frozenset([net.receiver_label(v)]), h))
    return zero_vector(cat)


@dataclass(frozen=True)
class Violation:
    """One failed constraint; violations are data, not exceptions."""

    kind: str
    where: str
    detail: str

    def __str__(self):
        return f"[{self.kind}] {self.where}: {self.detail}"


def _node_balance_residual(net, sol, cat, v):
    """Per-set residual of the node constraint at v (zero means satisfied)."""
    inc = x_in(net, sol, cat, v)
    out = x_out(net, sol, cat, v)
    shift = node_shift(net, cat, v, sol.h)
    nv = sol.node_vars(v)
    residuals = []
    for i in range(cat.size):
        moves = Fraction(0)
        for j in cat.member_of[i]:
            moves += nv.r_at(j) - nv.n_at(j)
        for j in cat.union_of[i]:
            moves -= nv.r_at(j) - nv.n_at(j)
        residuals.append(out[i] - inc[i] - moves - shift[i])
    return residuals


def check_solution(net: Network, sol: FlowSolution, cat: Catalog, routing_only=frozenset()):
    """Evaluate the full constraint set; returns a list of violations.

    Checks nonnegativity, per-edge capacity, the node balance at every node
    (with source injection and receiver absorption), the source and receiver
    rate conditions, and n = 0 at routing-only nodes.
    """
    violations = []
    for eid in sol.edges:
        if eid not in net.edge_map:
            raise ValueError(f"solution references unknown edge {eid!r}")
    for v in sol.nodes:
        if v not in net.kind:
            raise ValueError(f"solution references unknown node {v!r}")

    for eid, vec in sorted(sol.edges.items()):
        if len(vec) != cat.size:
            raise ValueError(f"edge {eid!r}: vector length {len(vec)}, expected {cat.size}")
        for i, value in enumerate(vec):
            if value < 0:
                violations.append(
                    Violation("negative-entry", eid, f"x({cat.set_key(i)}) = {value}")
                )
    for v, nv in sorted(sol.nodes.items()):
        for j, value in sorted(nv.r.items()):
            if value < 0:
                violations.append(Violation("negative-entry", v, f"r[{cat.q_key(j)}] = {value}"))
        for j, value in sorted(nv.n.items()):
            if value < 0:
                violations.append(Violation("negative-entry", v, f"n[{cat.q_key(j)}] = {value}"))

    for e in net.edges:
        total = sum(sol.edge_vector(e.id, cat), Fraction(0))
        if total > e.capacity:
            violations.append(
                Violation("edge-capacity", e.id, f"sum {total} exceeds capacity {e.capacity}")
            )

    for v in net.node_ids:
        residuals = _node_balance_residual(net, sol, cat, v)
        for i, res in enumerate(residuals):
            if res != 0:
                violations.append(
                    Violation("node-balance", v, f"set {{{cat.set_key(i)}}} residual {res}")
                )

    for k in range(1, cat.k + 1):
        out_s = i_k(x_out(net, sol, cat, net.source), k, cat)
        if out_s != sol.h:
            violations.append(
                Violation("source-rate", net.source, f"I_{k} = {out_s}, expected {sol.h}")
            )
        rid = net.receivers[k - 1]
        in_k = i_k(x_in(net, sol, cat, rid), k, cat)
        if in_k != sol.h:
            violations.append(Violation("receiver-rate", rid, f"I_{k} = {in_k}, expected {sol.h}"))

    for v in sorted(routing_only):
        nv = sol.node_vars(v)
        for j, value in sorted(nv.n.items()):
            if value != 0:
                violations.append(
                    Violation("routing-only", v, f"n[{cat.q_key(j)}] = {value} at routing node")
                )
    return violations


def check_conservation(net: Network, sol: FlowSolution, cat: Catalog):
    """Per-receiver flow conservation plus the two terminal rate equalities.

    These rows are implied by a solution that passes check_solution; keeping
    them separate lets that redundancy be tested rather than assumed.
    """
    violations = []
    for v in net.node_ids:
        inc = x_in(net, sol, cat, v)
        out = x_out(net, sol, cat, v)
        for k in range(1, cat.k + 1):
            if v == net.source or v == net.receivers[k - 1]:
                continue
            flow_in, flow_out = i_k(inc, k, cat), i_k(out, k, cat)
            if flow_in != flow_out:
                violations.append(
                    Violation("conservation", v, f"I_{k} in {flow_in} != out {flow_out}")
                )
    for k in range(1, cat.k + 1):
        out_s = i_k(x_out(net, sol, cat, net.source), k, cat)
        if out_s != sol.h:
            violations.append(
                Violation("source-rate", net.source, f"I_{k} = {out_s}, expected {sol.h}")
            )
        rid = net.receivers[k - 1]
        in_k = i_k(x_in(net, sol, cat, rid), k, cat)
        if in_k != sol.h:
            violations.append(Violation("receiver-rate", rid, f"I_{k} = {in_k}, expected {sol.h}"))
    return violations


# ---------------------------------------------------------------------------
# Overlap labeling and the replicate-then-code particular solution
# ---------------------------------------------------------------------------

def overlap_vectors(exp: UnitExpansion, paths: PathSet, cat: Catalog):
    """Label each unit edge with the set of receivers whose paths use it.

    Each used unit edge contributes one unit on that exact set; vectors of
    parallel unit edges are summed per original edge.
    """
    users: dict[str, set] = {}
    for k in range(1, len(paths.receivers) + 1):
        for path in paths.for_label(k):
            for u in path:
                users.setdefault(u, set()).add(k)
    out = {}
    for eid, units in exp.by_edge.items():
        vec = zero_vector(cat)
        for u in units:
            if u in users:
                vec = add_vectors(vec, unit_vector(cat, frozenset(users[u])))
        out[eid] = vec
    return out


def particular_solution(x_in_vec, x_out_vec, cat: Catalog) -> NodeVars:
    """Replicate everything down to singletons, then code up to the outputs.

    For every non-singleton set P_i, put r = x_in(P_i) and n = x_out(P_i) on
    the collection of singletons of P_i. Requires per-receiver conservation
    between the two vectors; the result satisfies the node balance exactly.
    """
    for k in range(1, cat.k + 1):
        fin, fout = i_k(x_in_vec, k, cat), i_k(x_out_vec, k, cat)
        if fin != fout:
            raise ConservationError(f"receiver {k}: I_k in {fin} != out {fout}")
    nv = NodeVars()
    for i, j in cat.singleton_collection.items():
        if x_in_vec[i]:
            nv.r[j] = x_in_vec[i]
        if x_out_vec[i]:
            nv.n[j] = x_out_vec[i]
    return nv


def witness_solution(net: Network, cat: Catalog, h) -> FlowSolution:
    """Assemble a feasible solution at integral rate h from a decomposition.

    Decomposes h edge-disjoint paths per receiver, labels overlaps, and
    derives every node's variables with the particular solution applied to
    its shifted in/out vectors. The result passes check_solution.
    """
    exp, paths = expand_and_decompose(net, h)
    vectors = overlap_vectors(exp, paths, cat)
    sol = FlowSolution(Fraction(int(parse_rational(h))), dict(vectors), {})
    for v in net.node_ids:
        shift = node_shift(net, cat, v, sol.h)
        inc = add_vectors(x_in(net, sol, cat, v), tuple(max(s, Fraction(0)) for s in shift))
        out = add_vectors(x_out(net, sol, cat, v), tuple(max(-s, Fraction(0)) for s in shift))
        nv = particular_solution(inc, out, cat)
        if not nv.is_zero():
            sol.nodes[v] = nv
    return sol


# ---------------------------------------------------------------------------
# Solution documents
# ---------------------------------------------------------------------------

def solution_to_document(sol: FlowSolution, cat: Catalog) -> dict:
    """Serialize to the JSON structure; zero entries are omitted."""
    edges = {}
    for eid, vec in sol.edges.items():
        entries = {cat.set_key(i): format_rational(v) for i, v in enumerate(vec) if v}
        if entries:
            edges[eid] = entries
    nodes = {}
    for v, nv in sol.nodes.items():
        entry = {}
        r = {cat.q_key(j): format_rational(val) for j, val in sorted(nv.r.items()) if val}
        n = {cat.q_key(j): format_rational(val) for j, val in sorted(nv.n.items()) if val}
        if r:
            entry["r"] = r
        if n:
            entry["n"] = n
        if entry:
            nodes[v] = entry
    return {"h": format_rational(sol.h), "edges": edges, "nodes": nodes}


def solution_from_document(doc: dict, cat: Catalog) -> FlowSolution:
    if not isinstance(doc, dict) or "h" not in doc:
        raise ValueError("solution document must be an object with an 'h' field")
    edges = {}
    for eid, entries in doc.get("edges", {}).items():
        vec = list(zero_vector(cat))
        for key, value in entries.items():
            vec[cat.parse_set_key(key)] = parse_rational(value)
        edges[eid] = tuple(vec)
    nodes = {}
    for v, entry in doc.get("nodes", {}).items():
        nv = NodeVars()
        for j_key, value in entry.get("r", {}).items():
            nv.r[cat.parse_q_key(j_key)] = parse_rational(value)
        for j_key, value in entry.get("n", {}).items():
            nv.n[cat.parse_q_key(j_key)] = parse_rational(value)
        nodes[v] = nv
    return FlowSolution(parse_rational(doc["h"]), edges, nodes)


def dump_solution(sol: FlowSolution, cat: Catalog) -> str:
    return json.dumps(solution_to_document(sol, cat), indent=2)


def load_solution(text: str, cat: Catalog) -> FlowSolution:
    return solution_from_document(json.loads(text), cat)


def time_instances(sol: FlowSolution) -> int:
    """Number of time instances needed to realize the solution integrally.

    This is the least common multiple of all denominators; no claim of
    minimality is made.
    """
    denominators = [sol.h.denominator]
    for vec in sol.edges.values():
        denominators.extend(v.denominator for v in vec)
    for nv in sol.nodes.values():
        denominators.extend(v.denominator for v in nv.r.values())
        denominators.extend(v.denominator for v in nv.n.values())
    return lcm(*denominators) if denominators else 1


def scale_solution(sol: FlowSolution, factor) -> FlowSolution:
    """Multiply every quantity by a positive rational factor."""
    factor = parse_rational(factor)
    if factor <= 0:
        raise ValueError(f"scale factor must be positive, got {factor}")
    edges = {eid: scale_vector(factor, vec) for eid, vec in sol.edges.items()}
    nodes = {}
    for v, nv in sol.nodes.items():
        nodes[v] = NodeVars(
            {j: factor * val for j, val in nv.r.items()},
            {j: factor * val for j, val in nv.n.items()},
        )
    return FlowSolution(sol.h * factor, edges, nodes)


def scale_network(net: Network, factor) -> Network:
    """Copy of the network with every capacity multiplied by ``factor``."""
    factor = parse_rational(factor)
    return Network(
        [(v, net.kind[v]) for v in net.node_ids],
        [(e.id, e.tail, e.head, e.capacity * factor) for e in net.edges],
        net.source,
        list(net.receivers),
    )
