import json

import pytest

from mincast.netmodel import Network, parse_network

BUTTERFLY_DOC = {
    "nodes": [{"id": v} for v in ["s", "a", "b", "m", "w", "t1", "t2"]],
    "edges": [
        {"from": "s", "to": "a", "capacity": 1},
        {"from": "s", "to": "b", "capacity": 1},
        {"from": "a", "to": "t1", "capacity": 1},
        {"from": "a", "to": "m", "capacity": 1},
        {"from": "b", "to": "m", "capacity": 1},
        {"from": "b", "to": "t2", "capacity": 1},
        {"from": "m", "to": "w", "capacity": 1},
        {"from": "w", "to": "t1", "capacity": 1},
        {"from": "w", "to": "t2", "capacity": 1},
    ],
    "source": "s",
    "receivers": ["t1", "t2"],
}

# The classic rate-2 code: coding happens at m only; a, b, and w replicate.
BUTTERFLY_SOLUTION_DOC = {
    "h": "2",
    "edges": {
        "s->a": {"1,2": "1"},
        "s->b": {"1,2": "1"},
        "a->t1": {"1": "1"},
        "a->m": {"2": "1"},
        "b->m": {"1": "1"},
        "b->t2": {"2": "1"},
        "m->w": {"1,2": "1"},
        "w->t1": {"1": "1"},
        "w->t2": {"2": "1"},
    },
    "nodes": {
        "a": {"r": {"{1}|{2}": "1"}},
        "b": {"r": {"{1}|{2}": "1"}},
        "w": {"r": {"{1}|{2}": "1"}},
        "m": {"n": {"{1}|{2}": "1"}},
    },
}


@pytest.fixture
def butterfly() -> Network:
    return parse_network(json.dumps(BUTTERFLY_DOC))


@pytest.fixture
def butterfly_text() -> str:
    return json.dumps(BUTTERFLY_DOC)
