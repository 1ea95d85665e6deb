"""Shared fixtures: the worked example of the data structure and named queries."""

import random

import pytest

from src.query_model import Atom, Database, Query
from src.query_parser import parse_database, parse_query

EXAMPLE_QUERY = "Q(x,y,z,y2,z2) :- R(x,y,z), R(x,y,z2), E(x,y), E(x,y2), S(x,y,z)."

EXAMPLE_E = [("a", "e"), ("a", "f"), ("b", "d"), ("b", "g"), ("b", "h")]
EXAMPLE_S = [("a", "e", "a"), ("a", "e", "b"), ("a", "f", "c"), ("b", "g", "b"), ("b", "p", "a")]
EXAMPLE_R = EXAMPLE_S + [("a", "e", "c"), ("b", "g", "a"), ("b", "g", "c"), ("b", "p", "b"), ("b", "p", "c")]


def _example_tuples():
    """The 23 result tuples in head order (x, y, z, y2, z2)."""
    rows = []
    for z in ("a", "b"):
        for z2 in ("a", "b", "c"):
            for y2 in ("e", "f"):
                rows.append(("a", "e", z, y2, z2))
    for y2 in ("e", "f"):
        rows.append(("a", "f", "c", y2, "c"))
    for z2 in ("a", "b", "c"):
        for y2 in ("d", "g", "h"):
            rows.append(("b", "g", "b", y2, z2))
    return set(rows)


EXAMPLE_RESULT = _example_tuples()

NAMED_QUERIES = {
    "sxy_boolean": "Q() :- S(x), E(x,y), T(y).",
    "ext_unary": "Q(x) :- E(x,y), T(y).",
    "join": "Q(x,y) :- E(x,y), T(y).",
    "boolean_join": "Q() :- E(x,y), T(y).",
    "loops": "Q() :- E(x,x), E(x,y), E(y,y).",
    "two_trees": "Q(x1,x2,x3) :- E(x1,x2), R(x4,x1,x2,x1), R(x5,x3,x2,x1).",
}


def random_query(rng: random.Random) -> Query:
    """A small query over binary E and unary T, not necessarily q-hierarchical."""
    variables = ["x", "y", "z", "w"]
    atoms = []
    for _ in range(rng.randint(1, 4)):
        if rng.random() < 0.6:
            atoms.append(Atom(relation="E", vars=(rng.choice(variables), rng.choice(variables))))
        else:
            atoms.append(Atom(relation="T", vars=(rng.choice(variables),)))
    body = list(dict.fromkeys(var for atom in atoms for var in atom.vars))
    head = tuple(var for var in body if rng.random() < 0.4)
    return Query(head=head, atoms=tuple(atoms))


def example_snapshot_text() -> str:
    lines = [f"E {a} {b}" for a, b in EXAMPLE_E]
    lines += [f"S {' '.join(row)}" for row in EXAMPLE_S]
    lines += [f"R {' '.join(row)}" for row in EXAMPLE_R]
    return "\n".join(lines) + "\n"


@pytest.fixture
def example_query() -> Query:
    return parse_query(EXAMPLE_QUERY)


@pytest.fixture
def example_db() -> Database:
    return parse_database(example_snapshot_text())


@pytest.fixture
def named():
    return {name: parse_query(text) for name, text in NAMED_QUERIES.items()}
