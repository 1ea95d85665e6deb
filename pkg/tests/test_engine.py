"""
Tests for the dynamic engine: golden values on the worked example,
agreement with brute force, register exactness and step bounds.
"""

import itertools
import random
from collections import defaultdict

import pytest

from src.bench import run_bench
from src.engine import (
    END_OF_ENUMERATION,
    CoreNotQHierarchical,
    Engine,
    StaleCursorError,
    UnknownVariableError,
)
from src.oracle import eval_naive
from src.query_model import Database, Query, UpdateCommand
from src.query_parser import parse_query
from src.workload import GeneratorParams, gen_random_qh, gen_scaling_workload
from tests.conftest import EXAMPLE_RESULT


def loaded(query: Query, db: Database) -> Engine:
    engine = Engine.create(query)
    engine.load(db)
    return engine


def results(engine: Engine) -> list:
    return list(engine.enumerate())


class TestWorkedExample:
    def test_count_and_enumeration(self, example_query, example_db):
        engine = loaded(example_query, example_db)
        assert engine.count() == 23
        assert engine.answer()
        tuples = results(engine)
        assert len(tuples) == 23
        assert set(tuples) == EXAMPLE_RESULT

    def test_insert_then_delete(self, example_query, example_db):
        engine = loaded(example_query, example_db)
        assert engine.apply(UpdateCommand.insert("E", "b", "p")).applied
        assert engine.count() == 38
        assert len(set(results(engine))) == 38
        assert engine.apply(UpdateCommand.delete("E", "b", "p")).applied
        assert engine.count() == 23
        assert set(results(engine)) == EXAMPLE_RESULT

    def test_root_weights(self, example_query, example_db):
        engine = loaded(example_query, example_db)
        assert engine.inspect("x", ("a",)).weight == 14
        assert engine.inspect("x", ("b",)).weight == 9
        engine.apply(UpdateCommand.insert("E", "b", "p"))
        assert engine.inspect("x", ("b",)).weight == 24
        engine.apply(UpdateCommand.delete("E", "b", "p"))
        assert engine.inspect("x", ("b",)).weight == 9

    def test_present_but_unfit_item(self, example_query, example_db):
        engine = loaded(example_query, example_db)
        snapshot = engine.inspect("y", ("b", "p"))
        assert snapshot.exists
        assert snapshot.weight == 0
        assert snapshot.counters == {0: 3, 1: 3, 2: 0, 4: 1}
        assert snapshot.free_weight == 0

    def test_absent_item_and_unknown_variable(self, example_query, example_db):
        engine = loaded(example_query, example_db)
        assert not engine.inspect("x", ("q",)).exists
        with pytest.raises(UnknownVariableError):
            engine.inspect("nope", ("a",))

    def test_duplicate_insert_is_noop(self, example_query, example_db):
        engine = loaded(example_query, example_db)
        first = engine.apply(UpdateCommand.insert("E", "b", "p"))
        before = engine.state_snapshot()
        second = engine.apply(UpdateCommand.insert("E", "b", "p"))
        assert first.applied and not second.applied
        assert second.version == first.version
        assert engine.state_snapshot() == before

    def test_loading_twice_changes_nothing(self, example_query, example_db):
        engine = loaded(example_query, example_db)
        before = engine.state_snapshot()
        engine.load(example_db)
        assert engine.state_snapshot() == before
        assert engine.count() == 23

    def test_audit_passes(self, example_query, example_db):
        engine = loaded(example_query, example_db)
        engine.audit()
        engine.apply(UpdateCommand.insert("E", "b", "p"))
        engine.audit()


class TestSmallQueries:
    def test_create_rejects_hard_core(self, named):
        with pytest.raises(CoreNotQHierarchical) as info:
            Engine.create(named["sxy_boolean"])
        assert not info.value.classification.core_is_q_hierarchical

    def test_self_join_query_runs_on_core(self, named):
        engine = Engine.create(named["loops"])
        assert str(engine.core) == "Q() :- E(x,x)."
        engine.apply(UpdateCommand.insert("E", "1", "2"))
        assert not engine.answer()
        engine.apply(UpdateCommand.insert("E", "2", "2"))
        assert engine.answer()
        assert engine.count() == 1
        assert results(engine) == [()]

    def test_projection_count(self):
        engine = Engine.create(parse_query("Q(x) :- E(x,y)."))
        for fact in [("1", "2"), ("1", "3"), ("2", "2")]:
            engine.apply(UpdateCommand.insert("E", *fact))
        assert engine.count() == 2
        assert sorted(results(engine)) == [("1",), ("2",)]

    def test_join(self, named):
        engine = Engine.create(named["join"])
        for command in [
            UpdateCommand.insert("E", "1", "2"),
            UpdateCommand.insert("E", "3", "2"),
            UpdateCommand.insert("T", "2"),
        ]:
            engine.apply(command)
        assert set(results(engine)) == {("1", "2"), ("3", "2")}
        assert engine.count() == 2

    def test_empty_database(self, example_query):
        engine = Engine.create(example_query)
        assert engine.count() == 0
        assert not engine.answer()
        assert engine.open_cursor().next() is END_OF_ENUMERATION

    def test_repeated_variable_guard(self):
        engine = Engine.create(parse_query("Q(x) :- E(x,x)."))
        engine.apply(UpdateCommand.insert("E", "1", "2"))
        assert engine.count() == 0
        engine.apply(UpdateCommand.insert("E", "2", "2"))
        assert results(engine) == [("2",)]

    def test_components_multiply(self):
        engine = Engine.create(parse_query("Q(u,x) :- E(x,y), F(u)."))
        for command in [
            UpdateCommand.insert("E", "1", "2"),
            UpdateCommand.insert("E", "3", "4"),
            UpdateCommand.insert("F", "a"),
            UpdateCommand.insert("F", "b"),
        ]:
            engine.apply(command)
        assert engine.count() == 4
        assert set(results(engine)) == {("a", "1"), ("a", "3"), ("b", "1"), ("b", "3")}

    def test_boolean_component_gates_results(self):
        engine = Engine.create(parse_query("Q(x) :- E(x,y), T(z)."))
        engine.apply(UpdateCommand.insert("E", "1", "2"))
        engine.apply(UpdateCommand.insert("E", "3", "2"))
        assert engine.count() == 0
        assert results(engine) == []
        engine.apply(UpdateCommand.insert("T", "9"))
        assert engine.count() == 2
        engine.apply(UpdateCommand.delete("T", "9"))
        assert not engine.answer()

    def test_facts_outside_the_query_are_stored(self, named):
        engine = Engine.create(named["join"])
        assert engine.apply(UpdateCommand.insert("Z", "1")).applied
        assert engine.count() == 0
        assert len(engine.facts) == 1

    def test_delete_of_absent_fact(self, named):
        engine = Engine.create(named["join"])
        summary = engine.apply(UpdateCommand.delete("E", "1", "2"))
        assert not summary.applied
        assert summary.version == 0


class TestCursor:
    def test_stale_after_update(self, named):
        engine = Engine.create(named["join"])
        engine.apply(UpdateCommand.insert("E", "1", "2"))
        engine.apply(UpdateCommand.insert("T", "2"))
        cursor = engine.open_cursor()
        engine.apply(UpdateCommand.insert("E", "5", "2"))
        with pytest.raises(StaleCursorError):
            cursor.next()

    def test_end_is_sticky(self, named):
        engine = Engine.create(named["join"])
        engine.apply(UpdateCommand.insert("E", "1", "2"))
        engine.apply(UpdateCommand.insert("T", "2"))
        cursor = engine.open_cursor()
        assert cursor.next() == ("1", "2")
        assert cursor.next() is END_OF_ENUMERATION
        assert cursor.next() is END_OF_ENUMERATION

    def test_boolean_query_yields_empty_tuple_once(self, named):
        engine = Engine.create(named["boolean_join"])
        assert results(engine) == []
        engine.apply(UpdateCommand.insert("E", "1", "2"))
        engine.apply(UpdateCommand.insert("T", "2"))
        assert results(engine) == [()]


def expected_items(engine: Engine) -> dict:
    """Counters of every item that must be present, recomputed from the facts."""
    expected = defaultdict(dict)
    for component in engine.components:
        tree = component.tree
        for local, atom in enumerate(tree.component.atoms):
            path = tree.path(tree.node_of_atom(local))
            for values in engine.facts.relation(atom.relation):
                valuation = {}
                if any(valuation.setdefault(var, value) != value for var, value in zip(atom.vars, values)):
                    continue
                for depth in range(len(path)):
                    key = (path[depth], tuple(valuation[var] for var in path[: depth + 1]))
                    counters = expected[key]
                    counters[local] = counters.get(local, 0) + 1
    return expected


def brute_force_weights(engine: Engine, component, node: str, key: tuple) -> tuple:
    tree = component.tree
    path = tree.path(node)
    atoms = [tree.component.atoms[i] for i in sorted(tree.atoms_below(node))]
    below = [var for var in tree.nodes if var not in path and set(tree.path(var)) >= set(path)]
    free_below = [var for var in below if var in tree.free_subtree]
    tokens = engine.decode(key)
    weight = sum(
        1
        for row in eval_naive(Query(head=tuple(path) + tuple(below), atoms=tuple(atoms)), engine.facts)
        if row[: len(path)] == tokens
    )
    free_weight = sum(
        1
        for row in eval_naive(Query(head=tuple(path) + tuple(free_below), atoms=tuple(atoms)), engine.facts)
        if row[: len(path)] == tokens
    )
    return weight, free_weight


def assert_exact(engine: Engine) -> None:
    engine.audit()
    expected = expected_items(engine)
    stored = {}
    for component, item in engine.iter_items():
        local = {atom: count for atom, count in item.counters.items() if count}
        stored[(item.node.name, item.key)] = local
        weight, free_weight = brute_force_weights(engine, component, item.node.name, item.key)
        assert item.weight == weight, f"{item}: weight should be {weight}"
        if item.node.is_free:
            assert item.free_weight == free_weight, f"{item}: free weight should be {free_weight}"
    assert stored == dict(expected)


def test_registers_match_definitions_on_fuzz_states():
    params = GeneratorParams(domain_size=6, stream_len=40, max_atoms=4)
    checked = 0
    for seed in range(120):
        query, stream = gen_random_qh(seed, params)
        engine = Engine.create(query)
        for command in stream:
            if isinstance(command, UpdateCommand):
                engine.apply(command)
        if engine.facts.adom_size <= 10:
            assert_exact(engine)
            checked += 1
    assert checked >= 100


def test_update_and_inverse_restore_state(example_query, example_db):
    engine = loaded(example_query, example_db)
    before = engine.state_snapshot()
    rng = random.Random(5)
    applied = []
    for _ in range(60):
        relation = rng.choice(["E", "R", "S"])
        arity = 2 if relation == "E" else 3
        values = tuple(rng.choice("abcp") for _ in range(arity))
        command = UpdateCommand.insert(relation, *values) if rng.random() < 0.6 else UpdateCommand.delete(relation, *values)
        if engine.apply(command).applied:
            applied.append(command)
    for command in reversed(applied):
        assert engine.apply(command.inverse()).applied
    assert engine.state_snapshot() == before


def test_insert_order_does_not_matter(example_query, example_db):
    facts = list(example_db.facts())
    reference = loaded(example_query, example_db).state_snapshot()
    rng = random.Random(11)
    for _ in range(5):
        rng.shuffle(facts)
        engine = Engine.create(example_query)
        for relation, values in facts:
            engine.apply(UpdateCommand.insert(relation, *values))
        assert engine.state_snapshot() == reference


def test_no_duplicates_and_agreement_with_oracle(example_query):
    rng = random.Random(3)
    engine = Engine.create(example_query)
    for _ in range(150):
        relation = rng.choice(["E", "R", "S"])
        values = tuple(rng.choice("abcd") for _ in range(2 if relation == "E" else 3))
        engine.apply(UpdateCommand.insert(relation, *values))
    tuples = results(engine)
    assert len(tuples) == len(set(tuples))
    assert set(tuples) == eval_naive(example_query, engine.facts)
    assert engine.count() == len(tuples)


def _max_steps(query: Query, size: int) -> tuple:
    """(max steps per update, max steps between yields) over a scaling workload."""
    engine = Engine.create(query)
    stream = gen_scaling_workload(query, size, seed=17)
    update_max = 0
    for command in stream:
        if isinstance(command, UpdateCommand):
            before = engine.step_counter
            engine.apply(command)
            update_max = max(update_max, engine.step_counter - before)
    delay_max = 0
    before = engine.step_counter
    cursor = engine.open_cursor()
    while True:
        result = cursor.next()
        delay_max = max(delay_max, engine.step_counter - before)
        before = engine.step_counter
        if result is END_OF_ENUMERATION:
            break
    return update_max, delay_max


@pytest.mark.parametrize(
    "query",
    [
        parse_query("Q(x,y,z,y2,z2) :- R(x,y,z), R(x,y,z2), E(x,y), E(x,y2), S(x,y,z)."),
        parse_query("Q(x,y) :- E(x,y), T(y), R(y,z)."),
        gen_random_qh(4, GeneratorParams(), self_join_free=True)[0],
    ],
)
def test_step_bounds_do_not_depend_on_database_size(query):
    measured = [_max_steps(query, size) for size in (100, 1000, 10000)]
    assert measured[0] == measured[1] == measured[2], f"{query}: {measured}"


def _median_update_us(query: Query, size: int) -> float:
    """Best of three median update latencies over a scaling workload."""
    stream = gen_scaling_workload(query, size, seed=23, updates=2000, probes=1)
    medians = []
    for _ in range(3):
        report = run_bench(query, [(size, stream)])
        medians.append(report.value("update", size, "median_us"))
    return min(medians)


@pytest.mark.parametrize(
    "query",
    [
        parse_query("Q(x,y,z,y2,z2) :- R(x,y,z), R(x,y,z2), E(x,y), E(x,y2), S(x,y,z)."),
        parse_query("Q(x,y) :- E(x,y), T(y), R(y,z)."),
    ],
)
def test_update_latency_does_not_depend_on_database_size(query):
    small, large = _median_update_us(query, 100), _median_update_us(query, 10000)
    assert large <= 2 * small, f"{query}: {small:.2f}us at 100, {large:.2f}us at 10000"


def test_example_enumeration_delay_is_bounded(example_query, example_db):
    engine = loaded(example_query, example_db)
    before = engine.step_counter
    cursor = engine.open_cursor()
    deltas = []
    for _ in itertools.count():
        result = cursor.next()
        deltas.append(engine.step_counter - before)
        before = engine.step_counter
        if result is END_OF_ENUMERATION:
            break
    # five free nodes: scan every slot, advance one, reset the rest
    assert max(deltas) <= 2 * 5
    assert len(deltas) == 24
