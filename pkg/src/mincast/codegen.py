"""Realize a flow solution as an explicit multicast code.

Every original node is rewritten into a gadget of wires, replicators, and
coders: packets for a receiver set gather at a per-set hub, replicators split
union packets into member copies, coders merge member packets into union
packets, and a seeded random matching splices each hub away. Global coding
vectors over GF(2^m) then propagate in topological order, and each receiver
checks that its collected vectors have full rank.
"""

from __future__ import annotations

import heapq
import random
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from .flowalg import (
    Catalog,
    FlowSolution,
    NodeVars,
    check_solution,
    format_rational,
)
from .gf2m import GF2m
from .netmodel import Network, NonIntegralError, _edmonds_karp

EMITTER = "source-emitter"
COLLECTOR = "receiver-collector"
REPLICATOR = "replicator"
CODER = "coder"
WIRE = "wire"

EMITTER_ID = "@source"


class CodegenError(RuntimeError):
    """Construction-stage failure."""


class InvalidSolutionError(CodegenError):
    """The solution does not satisfy the constraint set."""


class DegreeMismatchError(CodegenError):
    """Hub in/out degree identity violated; the solution is inconsistent."""


class ModelViolationError(CodegenError):
    """A cycle spans several original nodes: the host network was cyclic."""


class GadgetCycleError(CodegenError):
    """A gadget cycle persisted through rematching and cancellation."""


@dataclass(frozen=True)
class FieldSpec:
    """Coding field GF(2^m) and the seed for coefficient draws."""

    m: int = 16
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.m <= 32:
            raise ValueError(f"field degree {self.m} outside 1..32")

    @property
    def q(self) -> int:
        return 1 << self.m


@dataclass(frozen=True)
class GadgetNode:
    id: str
    tag: str
    origin: str | None = None
    q_index: int | None = None
    label: int | None = None


@dataclass
class GadgetEdge:
    id: str
    tail: str | None = None
    head: str | None = None
    origin_edge: str | None = None


class GadgetGraph:
    """Unit-capacity rewiring of the network; carries its construction inputs."""

    def __init__(self, net: Network, sol: FlowSolution, cat: Catalog, seed: int):
        self.net = net
        self.sol = sol
        self.cat = cat
        self.seed = seed
        self.nodes: dict[str, GadgetNode] = {}
        self.edges: dict[str, GadgetEdge] = {}
        self._out: dict[str, tuple[str, ...]] = {}
        self._in: dict[str, tuple[str, ...]] = {}

    def _freeze(self):
        out: dict[str, list[str]] = {nid: [] for nid in self.nodes}
        inc: dict[str, list[str]] = {nid: [] for nid in self.nodes}
        for eid in sorted(self.edges):
            e = self.edges[eid]
            if e.tail is None or e.head is None:
                raise CodegenError(f"edge {eid} left unwired")
            out[e.tail].append(eid)
            inc[e.head].append(eid)
        self._out = {v: tuple(es) for v, es in out.items()}
        self._in = {v: tuple(es) for v, es in inc.items()}

    def out_edges(self, v: str) -> tuple[str, ...]:
        return self._out.get(v, ())

    def in_edges(self, v: str) -> tuple[str, ...]:
        return self._in.get(v, ())

    def collector_id(self, label: int) -> str:
        return f"@sink:{self.net.receivers[label - 1]}"

    def gadget_census(self) -> Counter:
        return Counter(node.tag for node in self.nodes.values())

    def find_cycle(self):
        """One directed cycle as a node list, or None."""
        color: dict[str, int] = {}
        parent_edge: dict[str, str] = {}
        for root in sorted(self.nodes):
            if color.get(root):
                continue
            stack = [(root, iter(self.out_edges(root)))]
            color[root] = 1
            while stack:
                node, it = stack[-1]
                advanced = False
                for eid in it:
                    head = self.edges[eid].head
                    if color.get(head, 0) == 1:
                        cycle = [head]
                        v = node
                        while v != head:
                            cycle.append(v)
                            v = self.edges[parent_edge[v]].tail
                        cycle.reverse()
                        return cycle
                    if color.get(head, 0) == 0:
                        color[head] = 1
                        parent_edge[head] = eid
                        stack.append((head, iter(self.out_edges(head))))
                        advanced = True
                        break
                if not advanced:
                    color[node] = 2
                    stack.pop()
        return None

    def topological_nodes(self) -> list[str]:
        """Deterministic topological order (lexicographic among ready nodes)."""
        indeg = {v: len(self.in_edges(v)) for v in self.nodes}
        ready = [v for v, d in indeg.items() if d == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            v = heapq.heappop(ready)
            order.append(v)
            for eid in self.out_edges(v):
                head = self.edges[eid].head
                indeg[head] -= 1
                if indeg[head] == 0:
                    heapq.heappush(ready, head)
        if len(order) != len(self.nodes):
            raise CodegenError("gadget graph has cycles; run remove_cycles first")
        return order

    def receiver_flow(self, label: int) -> Fraction:
        """Unit-capacity max-flow from the emitter to a receiver's collector."""
        adjacency: dict[str, list[int]] = {v: [] for v in self.nodes}
        arcs: list[list] = []
        for eid in sorted(self.edges):
            e = self.edges[eid]
            adjacency[e.tail].append(len(arcs))
            arcs.append([e.head, Fraction(1)])
            adjacency[e.head].append(len(arcs))
            arcs.append([e.tail, Fraction(0)])
        return _edmonds_karp(adjacency, arcs, EMITTER_ID, self.collector_id(label))


def _require_integral(sol: FlowSolution):
    bad = []
    if sol.h.denominator != 1:
        bad.append(f"h = {format_rational(sol.h)}")
    for eid, vec in sol.edges.items():
        if any(v.denominator != 1 for v in vec):
            bad.append(f"edge {eid}")
    for v, nv in sol.nodes.items():
        values = list(nv.r.values()) + list(nv.n.values())
        if any(val.denominator != 1 for val in values):
            bad.append(f"node {v}")
    if bad:
        raise NonIntegralError(
            "solution must be integral (scale by the denominator lcm first): "
            + ", ".join(bad)
        )


def expand_gadgets(net: Network, sol: FlowSolution, cat: Catalog, seed: int) -> GadgetGraph:
    """Rewire every node into hubs, replicators, and coders, then splice.

    Requires an integral solution that passes check_solution. The hub degree
    identity is asserted; a mismatch means the solution was inconsistent.
    """
    _require_integral(sol)
    problems = check_solution(net, sol, cat)
    if problems:
        raise InvalidSolutionError(
            "solution fails validation: " + "; ".join(str(p) for p in problems)
        )
    h = int(sol.h)
    rng = random.Random(seed)
    g = GadgetGraph(net, sol, cat, seed)

    in_ports: dict[tuple[str, int], list[str]] = {}
    out_ports: dict[tuple[str, int], list[str]] = {}

    def new_edge(eid: str, tail=None, head=None, origin_edge=None) -> str:
        if eid in g.edges:
            raise CodegenError(f"gadget edge id collision: {eid}")
        g.edges[eid] = GadgetEdge(eid, tail, head, origin_edge)
        return eid

    g.nodes[EMITTER_ID] = GadgetNode(EMITTER_ID, EMITTER, origin=net.source)
    for t in range(h):
        uid = new_edge(f"{EMITTER_ID}>{t}", tail=EMITTER_ID)
        in_ports.setdefault((net.source, cat.full_index), []).append(uid)
    for k in range(1, cat.k + 1):
        rid = net.receivers[k - 1]
        cid = f"@sink:{rid}"
        g.nodes[cid] = GadgetNode(cid, COLLECTOR, origin=rid, label=k)
        for t in range(h):
            uid = new_edge(f"{cid}<{t}", head=cid)
            out_ports.setdefault((rid, cat.singleton_index[k - 1]), []).append(uid)

    for e in net.edges:
        vec = sol.edge_vector(e.id, cat)
        for i, value in enumerate(vec):
            for t in range(int(value)):
                uid = new_edge(f"{e.id}|{cat.set_key(i)}|{t}", origin_edge=e.id)
                out_ports.setdefault((e.tail, i), []).append(uid)
                in_ports.setdefault((e.head, i), []).append(uid)

    for v in net.node_ids:
        nv = sol.node_vars(v)
        for j in sorted(set(nv.r) | set(nv.n)):
            union_i = cat.union_index[j]
            for t in range(int(nv.r_at(j))):
                nid = f"{v}!r{j}#{t}"
                g.nodes[nid] = GadgetNode(nid, REPLICATOR, origin=v, q_index=j)
                uid = new_edge(f"{nid}<", head=nid)
                out_ports.setdefault((v, union_i), []).append(uid)
                for i in cat.collections[j]:
                    uid = new_edge(f"{nid}>{cat.set_key(i)}", tail=nid)
                    in_ports.setdefault((v, i), []).append(uid)
            for t in range(int(nv.n_at(j))):
                nid = f"{v}!n{j}#{t}"
                g.nodes[nid] = GadgetNode(nid, CODER, origin=v, q_index=j)
                for i in cat.collections[j]:
                    uid = new_edge(f"{nid}<{cat.set_key(i)}", head=nid)
                    out_ports.setdefault((v, i), []).append(uid)
                uid = new_edge(f"{nid}>", tail=nid)
                in_ports.setdefault((v, union_i), []).append(uid)

    for v in net.node_ids:
        for i in range(cat.size):
            incoming = in_ports.get((v, i), [])
            outgoing = out_ports.get((v, i), [])
            if len(incoming) != len(outgoing):
                raise DegreeMismatchError(
                    f"hub {v}({cat.set_key(i)}): {len(incoming)} in vs {len(outgoing)} out"
                )
            if not incoming:
                continue
            shuffled = list(incoming)
            rng.shuffle(shuffled)
            for t, (uid_in, uid_out) in enumerate(zip(shuffled, outgoing)):
                wid = f"{v}({cat.set_key(i)})#{t}"
                g.nodes[wid] = GadgetNode(wid, WIRE, origin=v, q_index=None)
                g.edges[uid_in].head = wid
                g.edges[uid_out].tail = wid

    g._freeze()
    return g


def _cancelled_solution(sol: FlowSolution, v: str, reductions: Counter) -> FlowSolution:
    nodes = {}
    for node_id, nv in sol.nodes.items():
        nodes[node_id] = NodeVars(dict(nv.r), dict(nv.n))
    nv = nodes.setdefault(v, NodeVars())
    for (kind, j), count in reductions.items():
        store = nv.r if kind == "r" else nv.n
        store[j] = store.get(j, Fraction(0)) - count
        if store[j] == 0:
            del store[j]
    if nv.is_zero():
        del nodes[v]
    return FlowSolution(sol.h, dict(sol.edges), nodes)


def remove_cycles(g: GadgetGraph) -> GadgetGraph:
    """Return an acyclic gadget graph realizing the same flows.

    A cycle that uses matching replicator and coder units on the same
    collections is pure junk: those units are deleted outright. Any other
    cycle is a matching artifact, so the affected construction is rebuilt
    with a fresh derived seed. Per-receiver connectivity is re-verified
    whenever the graph changed.
    """
    units = sum(
        count for tag, count in g.gadget_census().items() if tag in (REPLICATOR, CODER)
    )
    current = g
    changed = False
    for attempt in range(30 + 2 * units):
        cycle = current.find_cycle()
        if cycle is None:
            if changed:
                h = int(current.sol.h)
                for k in range(1, current.cat.k + 1):
                    if current.receiver_flow(k) < h:
                        raise GadgetCycleError(
                            f"cycle removal broke connectivity to receiver {k}"
                        )
            return current
        origins = {current.nodes[nid].origin for nid in cycle}
        if len(origins) != 1 or None in origins:
            raise ModelViolationError(
                f"cycle spans original nodes {sorted(str(o) for o in origins)}; "
                "the host network must be acyclic"
            )
        origin = origins.pop()
        reps = Counter(
            ("r", current.nodes[nid].q_index)
            for nid in cycle
            if current.nodes[nid].tag == REPLICATOR
        )
        cods = Counter(
            ("n", current.nodes[nid].q_index)
            for nid in cycle
            if current.nodes[nid].tag == CODER
        )
        next_seed = (g.seed * 1000003 + attempt + 1) & 0x7FFFFFFF
        if reps and Counter({k[1]: c for k, c in reps.items()}) == Counter(
            {k[1]: c for k, c in cods.items()}
        ):
            reduced = _cancelled_solution(current.sol, origin, reps + cods)
            current = expand_gadgets(current.net, reduced, current.cat, next_seed)
        else:
            current = expand_gadgets(current.net, current.sol, current.cat, next_seed)
        changed = True
    raise GadgetCycleError("persistent gadget cycle; could not be removed")


@dataclass
class CodedNetwork:
    """Gadget graph plus a global coding vector per unit edge."""

    graph: GadgetGraph
    h: int
    field: FieldSpec
    vectors: dict
    receiver_edges: dict


def assign_code(g: GadgetGraph, h: int, field: FieldSpec) -> CodedNetwork:
    """Propagate global coding vectors; coders draw seeded random coefficients.

    The emitter's h edges carry the standard basis; wires and replicators
    copy; a coder's output is a random GF(q)-linear combination of its inputs.
    Identical seeds give identical codes.
    """
    order = g.topological_nodes()
    gf = GF2m(field.m)
    rng = random.Random(field.seed)
    vectors: dict[str, tuple[int, ...]] = {}

    emit = sorted(g.out_edges(EMITTER_ID))
    if len(emit) != h:
        raise CodegenError(f"emitter has {len(emit)} edges, expected h = {h}")
    for t, eid in enumerate(emit):
        vectors[eid] = tuple(1 if p == t else 0 for p in range(h))

    for nid in order:
        node = g.nodes[nid]
        if node.tag in (EMITTER, COLLECTOR):
            continue
        ins = sorted(g.in_edges(nid))
        outs = sorted(g.out_edges(nid))
        if node.tag in (WIRE, REPLICATOR):
            if len(ins) != 1:
                raise CodegenError(f"{node.tag} {nid} has in-degree {len(ins)}")
            for eid in outs:
                vectors[eid] = vectors[ins[0]]
        elif node.tag == CODER:
            if len(outs) != 1:
                raise CodegenError(f"coder {nid} has out-degree {len(outs)}")
            combined = [0] * h
            for eid in ins:
                coeff = rng.randrange(field.q)
                vec = vectors[eid]
                combined = [gf.add(c, gf.mul(coeff, v)) for c, v in zip(combined, vec)]
            vectors[outs[0]] = tuple(combined)

    receiver_edges = {
        k: tuple(sorted(g.in_edges(g.collector_id(k)))) for k in range(1, g.cat.k + 1)
    }
    return CodedNetwork(g, h, field, vectors, receiver_edges)


def verify_code(coded: CodedNetwork, h: int) -> dict:
    """Per-receiver rank report; the code is valid iff every rank equals h."""
    gf = GF2m(coded.field.m)
    receivers = {}
    all_ok = True
    for label, edge_ids in sorted(coded.receiver_edges.items()):
        rows = [coded.vectors[eid] for eid in edge_ids]
        rank = gf.rank(rows) if h else 0
        ok = rank == h
        all_ok = all_ok and ok
        receivers[label] = {"rank": rank, "required": h, "valid": ok}
    return {"receivers": receivers, "valid": all_ok}


def code_report(coded: CodedNetwork, report: dict | None = None) -> dict:
    """JSON-ready report: per-unit-edge vectors in hex and per-receiver ranks."""
    if report is None:
        report = verify_code(coded, coded.h)
    edges = {
        eid: [format(c, "x") for c in vec]
        for eid, vec in sorted(coded.vectors.items())
        if coded.graph.edges[eid].origin_edge is not None
    }
    receivers = {}
    for label, edge_ids in sorted(coded.receiver_edges.items()):
        receivers[str(label)] = {
            "node": coded.graph.net.receivers[label - 1],
            "edges": list(edge_ids),
            "vectors": [[format(c, "x") for c in coded.vectors[eid]] for eid in edge_ids],
            "rank": report["receivers"][label]["rank"],
            "valid": report["receivers"][label]["valid"],
        }
    return {
        "h": coded.h,
        "field": {"m": coded.field.m, "seed": coded.field.seed},
        "edges": edges,
        "receivers": receivers,
        "valid": report["valid"],
    }


# ---------------------------------------------------------------------------
# DOT export
# ---------------------------------------------------------------------------

def _dot_quote(s: str) -> str:
    return '"' + s.replace('"', '\\"') + '"'


def network_dot(net: Network, sol: FlowSolution | None = None, cat: Catalog | None = None) -> str:
    """Annotated DOT of the original network; adds X_e and r/n when given."""
    lines = ["digraph network {", "  rankdir=LR;"]
    for v in net.node_ids:
        attrs = []
        if v == net.source:
            attrs.append("shape=box")
        elif v in net.receivers:
            attrs.append("shape=doublecircle")
        if net.kind[v] == "routing":
            attrs.append("style=dashed")
        label = v
        if sol is not None and cat is not None and v in sol.nodes:
            nv = sol.nodes[v]
            parts = [f"r[{cat.q_key(j)}]={format_rational(val)}" for j, val in sorted(nv.r.items())]
            parts += [f"n[{cat.q_key(j)}]={format_rational(val)}" for j, val in sorted(nv.n.items())]
            if parts:
                label = v + "\\n" + "\\n".join(parts)
        attrs.append(f"label={_dot_quote(label)}")
        lines.append(f"  {_dot_quote(v)} [{', '.join(attrs)}];")
    for e in net.edges:
        label = f"{e.id} c={format_rational(e.capacity)}"
        if sol is not None and cat is not None and e.id in sol.edges:
            vec = sol.edges[e.id]
            entries = ", ".join(
                f"{cat.set_key(i)}:{format_rational(v)}" for i, v in enumerate(vec) if v
            )
            if entries:
                label += f"\\nX=[{entries}]"
        lines.append(
            f"  {_dot_quote(e.tail)} -> {_dot_quote(e.head)} [label={_dot_quote(label)}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def gadget_dot(g: GadgetGraph) -> str:
    shapes = {
        EMITTER: "box",
        COLLECTOR: "doublecircle",
        REPLICATOR: "triangle",
        CODER: "invtriangle",
        WIRE: "point",
    }
    lines = ["digraph gadgets {", "  rankdir=LR;"]
    for nid in sorted(g.nodes):
        node = g.nodes[nid]
        lines.append(
            f"  {_dot_quote(nid)} [shape={shapes[node.tag]}, label={_dot_quote(nid)}];"
        )
    for eid in sorted(g.edges):
        e = g.edges[eid]
        lines.append(
            f"  {_dot_quote(e.tail)} -> {_dot_quote(e.head)} [label={_dot_quote(eid)}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
