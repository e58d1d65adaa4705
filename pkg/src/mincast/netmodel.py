"""Capacitated multicast networks: parsing, exact max-flow, unit-path decomposition.

Every quantity in this package is an exact `fractions.Fraction`; no floating
point is used anywhere in the core.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

Rational = Fraction

CODING = "coding"
ROUTING = "routing"
_KINDS = (CODING, ROUTING)


class NetworkError(ValueError):
    """Malformed or semantically invalid network description."""


class InfeasibleRateError(ValueError):
    """The requested multicast rate exceeds some receiver's max-flow."""


class NonIntegralError(ValueError):
    """Integral capacities (or an integral solution) are required."""


def parse_rational(value) -> Fraction:
    """Parse an int or a string such as "7/2" or "3" into an exact rational.

    Floats are rejected: they would silently corrupt exact feasibility tests.
    """
    if isinstance(value, bool):
        raise NetworkError(f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise NetworkError(f"not a rational: {value!r}") from exc
    raise NetworkError(f"not a rational: {value!r}")


def format_rational(value: Fraction) -> str:
    """Render a rational as "p" or "p/q" in lowest terms."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class Edge:
    """One directed link; parallel edges are distinct Edge records."""

    id: str
    tail: str
    head: str
    capacity: Fraction


class Network:
    """Directed multigraph with one source and K ordered receivers.

    Receiver labels 1..K follow the declaration order of ``receivers``.
    Instances are immutable after construction and safe to share between
    threads; all operations on them are pure functions.
    """

    def __init__(
        self,
        nodes: Iterable[tuple[str, str]],
        edges: Iterable[tuple[str, str, str, Fraction]],
        source: str,
        receivers: Sequence[str],
    ):
        self.kind: dict[str, str] = {}
        for nid, kind in nodes:
            if nid in self.kind:
                raise NetworkError(f"duplicate node id {nid!r}")
            if kind not in _KINDS:
                raise NetworkError(f"node {nid!r} has unknown kind {kind!r}")
            self.kind[nid] = kind
        self.node_ids: tuple[str, ...] = tuple(self.kind)

        edge_list = []
        seen = set()
        for eid, tail, head, capacity in edges:
            if eid in seen:
                raise NetworkError(f"duplicate edge id {eid!r}")
            seen.add(eid)
            for endpoint in (tail, head):
                if endpoint not in self.kind:
                    raise NetworkError(f"edge {eid!r} references unknown node {endpoint!r}")
            if tail == head:
                raise NetworkError(f"self-loop at node {tail!r} (edge {eid!r})")
            cap = parse_rational(capacity)
            if cap < 0:
                raise NetworkError(f"edge {eid!r} has negative capacity {capacity}")
            edge_list.append(Edge(eid, tail, head, cap))
        self.edges: tuple[Edge, ...] = tuple(edge_list)
        self.edge_map: dict[str, Edge] = {e.id: e for e in self.edges}

        if source not in self.kind:
            raise NetworkError(f"unknown source node {source!r}")
        if not receivers:
            raise NetworkError("at least one receiver is required")
        if len(set(receivers)) != len(receivers):
            raise NetworkError("receivers must be distinct")
        for r in receivers:
            if r not in self.kind:
                raise NetworkError(f"unknown receiver node {r!r}")
        if source in receivers:
            raise NetworkError(f"source {source!r} cannot be a receiver")
        self.source = source
        self.receivers: tuple[str, ...] = tuple(receivers)

        _in: dict[str, list[Edge]] = {nid: [] for nid in self.node_ids}
        _out: dict[str, list[Edge]] = {nid: [] for nid in self.node_ids}
        for e in self.edges:
            _out[e.tail].append(e)
            _in[e.head].append(e)
        self._in = {v: tuple(es) for v, es in _in.items()}
        self._out = {v: tuple(es) for v, es in _out.items()}

    @property
    def K(self) -> int:
        return len(self.receivers)

    def in_edges(self, v: str) -> tuple[Edge, ...]:
        if v not in self._in:
            raise NetworkError(f"unknown node {v!r}")
        return self._in[v]

    def out_edges(self, v: str) -> tuple[Edge, ...]:
        if v not in self._out:
            raise NetworkError(f"unknown node {v!r}")
        return self._out[v]

    def receiver_label(self, node_id: str) -> int:
        """1-based receiver label for a receiver node id."""
        try:
            return self.receivers.index(node_id) + 1
        except ValueError:
            raise NetworkError(f"{node_id!r} is not a receiver") from None

    @property
    def routing_nodes(self) -> frozenset[str]:
        return frozenset(v for v, kind in self.kind.items() if kind == ROUTING)

    @property
    def total_capacity(self) -> Fraction:
        return sum((e.capacity for e in self.edges), Fraction(0))

    @property
    def integral_capacities(self) -> bool:
        return all(e.capacity.denominator == 1 for e in self.edges)

    def is_acyclic(self) -> bool:
        indeg = {v: 0 for v in self.node_ids}
        for e in self.edges:
            indeg[e.head] += 1
        ready = deque(v for v, d in indeg.items() if d == 0)
        seen = 0
        while ready:
            v = ready.popleft()
            seen += 1
            for e in self._out[v]:
                indeg[e.head] -= 1
                if indeg[e.head] == 0:
                    ready.append(e.head)
        return seen == len(self.node_ids)

    @classmethod
    def from_document(cls, doc) -> "Network":
        """Build a Network from the parsed JSON document structure."""
        if not isinstance(doc, dict):
            raise NetworkError("document root must be an object")
        for field in ("nodes", "edges", "source", "receivers"):
            if field not in doc:
                raise NetworkError(f"missing field {field!r}")
        nodes = []
        for entry in doc["nodes"]:
            if not isinstance(entry, dict) or "id" not in entry:
                raise NetworkError(f"node entry {entry!r} must be an object with an 'id'")
            nodes.append((str(entry["id"]), entry.get("kind", CODING)))
        edges = []
        counts: dict[str, int] = {}
        for entry in doc["edges"]:
            if not isinstance(entry, dict):
                raise NetworkError(f"edge entry {entry!r} must be an object")
            for field in ("from", "to", "capacity"):
                if field not in entry:
                    raise NetworkError(f"edge entry {entry!r} missing field {field!r}")
            tail, head = str(entry["from"]), str(entry["to"])
            if "id" in entry:
                eid = str(entry["id"])
            else:
                base = f"{tail}->{head}"
                counts[base] = counts.get(base, 0) + 1
                eid = base if counts[base] == 1 else f"{base}#{counts[base]}"
            edges.append((eid, tail, head, parse_rational(entry["capacity"])))
        receivers = [str(r) for r in doc["receivers"]]
        return cls(nodes, edges, str(doc["source"]), receivers)

    def to_document(self) -> dict:
        return {
            "nodes": [{"id": v, "kind": self.kind[v]} for v in self.node_ids],
            "edges": [
                {"id": e.id, "from": e.tail, "to": e.head, "capacity": format_rational(e.capacity)}
                for e in self.edges
            ],
            "source": self.source,
            "receivers": list(self.receivers),
        }


def parse_network(text: str) -> Network:
    """Parse a JSON network document into a validated Network.

    Raises NetworkError with a line/column locus for syntax problems and with
    the offending identifier for semantic ones.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError(
            f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return Network.from_document(doc)


def load_network(path) -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_network(fh.read())


# ---------------------------------------------------------------------------
# Max-flow over exact rationals
# ---------------------------------------------------------------------------

def _edmonds_karp(adjacency, arcs, source, sink, limit=None):
    """Shortest-augmenting-path max-flow on a residual arc list.

    ``arcs`` is a flat list of [head, residual]; arc ``i`` and ``i ^ 1`` are
    twins. Mutates residuals in place and returns the flow value.
    """
    total = Fraction(0)
    while limit is None or total < limit:
        parent: dict[str, int] = {source: -1}
        queue = deque([source])
        while queue and sink not in parent:
            v = queue.popleft()
            for a in adjacency[v]:
                head, residual = arcs[a]
                if residual > 0 and head not in parent:
                    parent[head] = a
                    queue.append(head)
        if sink not in parent:
            break
        bottleneck = None
        v = sink
        while v != source:
            a = parent[v]
            residual = arcs[a][1]
            if bottleneck is None or residual < bottleneck:
                bottleneck = residual
            v = arcs[a ^ 1][0]
        if limit is not None:
            bottleneck = min(bottleneck, limit - total)
        v = sink
        while v != source:
            a = parent[v]
            arcs[a][1] -= bottleneck
            arcs[a ^ 1][1] += bottleneck
            v = arcs[a ^ 1][0]
        total += bottleneck
    return total


def _build_residual(net: Network):
    adjacency: dict[str, list[int]] = {v: [] for v in net.node_ids}
    arcs: list[list] = []
    for e in net.edges:
        adjacency[e.tail].append(len(arcs))
        arcs.append([e.head, e.capacity])
        adjacency[e.head].append(len(arcs))
        arcs.append([e.tail, Fraction(0)])
    return adjacency, arcs


def max_flow(net: Network, k: str) -> Fraction:
    """Exact max-flow value from the source to receiver ``k``."""
    if k not in net.receivers:
        raise ValueError(f"{k!r} is not a receiver")
    adjacency, arcs = _build_residual(net)
    return _edmonds_karp(adjacency, arcs, net.source, k)


def multicast_capacity(net: Network) -> Fraction:
    """Minimum over receivers of the source-to-receiver max-flow."""
    return min(max_flow(net, k) for k in net.receivers)


# ---------------------------------------------------------------------------
# Unit expansion and edge-disjoint path decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnitExpansion:
    """Expansion of each edge e into C(e) parallel unit-capacity edges."""

    by_edge: Mapping[str, tuple[str, ...]]
    origin: Mapping[str, str]
    endpoints: Mapping[str, tuple[str, str]]


@dataclass(frozen=True)
class PathSet:
    """Per receiver, h pairwise edge-disjoint unit-edge paths from the source.

    ``paths[k - 1]`` holds the paths of the receiver with label k; each path
    is a sequence of unit edge ids.
    """

    receivers: tuple[str, ...]
    paths: tuple[tuple[tuple[str, ...], ...], ...]

    def for_label(self, k: int) -> tuple[tuple[str, ...], ...]:
        return self.paths[k - 1]

    def for_receiver(self, node_id: str) -> tuple[tuple[str, ...], ...]:
        return self.paths[self.receivers.index(node_id)]


def _expand(net: Network) -> UnitExpansion:
    by_edge = {}
    origin = {}
    endpoints = {}
    for e in net.edges:
        units = tuple(f"{e.id}#{t}" for t in range(int(e.capacity)))
        by_edge[e.id] = units
        for u in units:
            origin[u] = e.id
            endpoints[u] = (e.tail, e.head)
    return UnitExpansion(by_edge, origin, endpoints)


def _support_cycles_removed(support: set, exp: UnitExpansion) -> None:
    """Cancel directed cycles in a 0/1 flow support, in place.

    Needed only for cyclic host graphs; flow around a cycle carries nothing.
    """
    out_by_node: dict[str, set] = {}
    for u in support:
        out_by_node.setdefault(exp.endpoints[u][0], set()).add(u)
    while True:
        # Iterative DFS over the support looking for a back edge.
        color: dict[str, int] = {}
        stack_edge: dict[str, str] = {}
        cycle = None
        for root in sorted(out_by_node):
            if color.get(root):
                continue
            stack = [(root, iter(sorted(out_by_node.get(root, ()))))]
            color[root] = 1
            while stack and cycle is None:
                node, it = stack[-1]
                advanced = False
                for u in it:
                    head = exp.endpoints[u][1]
                    if color.get(head, 0) == 1:
                        # Walk the DFS stack back to `head` collecting edges.
                        cyc = [u]
                        v = node
                        while v != head:
                            cyc.append(stack_edge[v])
                            v = exp.endpoints[stack_edge[v]][0]
                        cycle = cyc
                        advanced = True
                        break
                    if color.get(head, 0) == 0:
                        color[head] = 1
                        stack_edge[head] = u
                        stack.append((head, iter(sorted(out_by_node.get(head, ())))))
                        advanced = True
                        break
                if not advanced:
                    color[node] = 2
                    stack.pop()
            if cycle:
                break
        if cycle is None:
            return
        for u in cycle:
            support.discard(u)
            out_by_node[exp.endpoints[u][0]].discard(u)


def expand_and_decompose(net: Network, h) -> tuple[UnitExpansion, PathSet]:
    """Expand to unit edges and strip h edge-disjoint paths per receiver.

    Requires integral capacities and integral h <= multicast capacity. Path
    extraction is deterministic: the lexicographically smallest (by unit edge
    id) path in the remaining flow support is stripped first.
    """
    h = parse_rational(h)
    if h.denominator != 1 or h < 0:
        raise NonIntegralError(f"rate must be a nonnegative integer, got {h}")
    h = int(h)
    bad = [e.id for e in net.edges if e.capacity.denominator != 1]
    if bad:
        raise NonIntegralError(f"non-integral capacities on edges {bad}")
    exp = _expand(net)

    all_paths = []
    for rid in net.receivers:
        if h == 0:
            all_paths.append(())
            continue
        adjacency: dict[str, list[int]] = {v: [] for v in net.node_ids}
        arcs: list[list] = []
        unit_arc = {}
        for u in sorted(exp.origin):
            tail, head = exp.endpoints[u]
            unit_arc[u] = len(arcs)
            adjacency[tail].append(len(arcs))
            arcs.append([head, Fraction(1)])
            adjacency[head].append(len(arcs))
            arcs.append([tail, Fraction(0)])
        got = _edmonds_karp(adjacency, arcs, net.source, rid, Fraction(h))
        if got < h:
            raise InfeasibleRateError(
                f"receiver {rid!r} supports rate {got}, below requested {h}"
            )
        support = {u for u, a in unit_arc.items() if arcs[a][1] == 0}
        _support_cycles_removed(support, exp)

        out_by_node: dict[str, list] = {}
        for u in sorted(support):
            out_by_node.setdefault(exp.endpoints[u][0], []).append(u)
        paths = []
        for _ in range(h):
            node = net.source
            path = []
            while node != rid:
                u = out_by_node[node].pop(0)  # sorted: lexicographically least
                path.append(u)
                node = exp.endpoints[u][1]
            paths.append(tuple(path))
        all_paths.append(tuple(paths))
    return exp, PathSet(net.receivers, tuple(all_paths))


def decomposition_violations(net: Network, exp: UnitExpansion, ps: PathSet, h) -> list[str]:
    """Check the PathSet invariants; returns human-readable problems."""
    problems = []
    h = int(parse_rational(h))
    for k, rid in enumerate(ps.receivers, start=1):
        paths = ps.for_label(k)
        if len(paths) != h:
            problems.append(f"receiver {rid}: {len(paths)} paths, expected {h}")
        used: set[str] = set()
        per_edge: dict[str, int] = {}
        for path in paths:
            node = net.source
            for u in path:
                tail, head = exp.endpoints[u]
                if tail != node:
                    problems.append(f"receiver {rid}: path breaks at {u}")
                    break
                if u in used:
                    problems.append(f"receiver {rid}: unit edge {u} reused")
                used.add(u)
                per_edge[exp.origin[u]] = per_edge.get(exp.origin[u], 0) + 1
                node = head
            if path and node != rid:
                problems.append(f"receiver {rid}: path ends at {node}, not {rid}")
        for eid, count in per_edge.items():
            if count > net.edge_map[eid].capacity:
                problems.append(f"receiver {rid}: edge {eid} oversubscribed ({count})")
    return problems


# ---------------------------------------------------------------------------
# Random instance generator for property tests
# ---------------------------------------------------------------------------

def random_network(seed: int, max_nodes: int, K: int) -> Network:
    """Deterministic random acyclic network with capacities in 1..3.

    The source has no in-edges, every receiver is reachable, and the
    multicast capacity is at least 1. Identical seeds give identical networks.
    """
    if max_nodes < K + 1:
        raise ValueError(f"max_nodes must be at least K + 1 = {K + 1}")
    rng = random.Random(seed)
    for _ in range(10000):
        n = rng.randint(K + 1, max_nodes)
        names = ["s"] + [f"v{i}" for i in range(1, n)]
        receivers = rng.sample(names[1:], K)
        edges = []
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < 0.55:
                    edges.append((f"e{len(edges)}", names[i], names[j], Fraction(rng.randint(1, 3))))
        if edges and rng.random() < 0.3:
            # occasional parallel edge keeps the multigraph path exercised
            _, tail, head, _ = edges[rng.randrange(len(edges))]
            edges.append((f"e{len(edges)}", tail, head, Fraction(rng.randint(1, 3))))
        net = Network([(nm, CODING) for nm in names], edges, "s", receivers)
        if multicast_capacity(net) >= 1:
            return net
    raise RuntimeError("random_network failed to produce a connected instance")
