"""Tests for the query and snapshot text formats."""

import random

import pytest

from src.query_model import ParseError, Schema
from src.query_parser import format_database, format_query, parse_database, parse_query
from src.workload import gen_random_qh
from tests.conftest import random_query


def test_parse_simple_query():
    q = parse_query("Q(x) :- E(x,y), T(y).")
    assert q.head == ("x",)
    assert [atom.relation for atom in q.atoms] == ["E", "T"]
    assert q.atoms[0].vars == ("x", "y")


def test_parse_boolean_query_with_comments_and_newlines():
    q = parse_query("% Boolean\nQ() :-\n  S(x),\n  E(x, y),  % edge\n  T(y).\n")
    assert q.is_boolean
    assert len(q.atoms) == 3


def test_format_round_trip():
    text = "Q(x,y) :- E(x,y), T(y)."
    assert format_query(parse_query(text)) == text


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("Q(x) :- E(x,y)", "Expected '.'"),
        ("Q(x,x) :- E(x,y).", "Duplicate head variable"),
        ("Q(z) :- E(x,y).", "does not occur"),
        ("Q() :- E(x,y), E(x).", "Arity conflict"),
        ("Q(x) :- E(x,1).", "Constant"),
        ("Q(x) :- E().", "at least one variable"),
        ("Q(x) :- E(x,y) ; T(y).", "Unexpected character"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(ParseError) as info:
        parse_query(text)
    assert fragment in str(info.value)
    assert info.value.line == 1


def test_parse_error_reports_line_and_column():
    with pytest.raises(ParseError) as info:
        parse_query("Q(x) :-\n  E(x,y),\n  T(3).")
    assert info.value.line == 3
    assert info.value.column == 5


def test_schema_checks_arities():
    schema = Schema(relations={"E": 2, "T": 1})
    parse_query("Q(x) :- E(x,y), T(y).", schema)
    with pytest.raises(ParseError):
        parse_query("Q(x) :- E(x,y,z).", schema)
    with pytest.raises(ParseError):
        parse_query("Q(x) :- F(x).", schema)


def test_parse_database_in_file_order():
    db = parse_database("% facts\nE a b\n\nT b\nE 1 2 % numeric\n")
    assert list(db.facts()) == [("E", ("a", "b")), ("T", ("b",)), ("E", ("1", "2"))]
    assert format_database(db) == "E a b\nT b\nE 1 2\n"


def test_parse_database_reports_arity_line():
    with pytest.raises(ParseError) as info:
        parse_database("E a b\nE a\n")
    assert info.value.line == 2


def test_parse_database_rejects_bad_tokens():
    with pytest.raises(ParseError) as info:
        parse_database("E a b\nE a b-c\n")
    assert info.value.line == 2
    with pytest.raises(ParseError):
        parse_database("E\n")


def test_format_then_parse_is_identity_on_random_queries():
    rng = random.Random(5)
    queries = [random_query(rng) for _ in range(200)]
    queries += [gen_random_qh(seed)[0] for seed in range(200)]
    for query in queries:
        assert parse_query(format_query(query)) == query, str(query)
