"""
Brute-force evaluation used as ground truth for the engine.

``eval_naive`` backtracks over the atoms in query order. Each atom is
matched against the tuples of its relation that agree with the variables
bound so far, grouped once per call by the positions of those variables.
Nothing survives between calls, so it is also the recompute-from-scratch
baseline in benchmarks.
"""

import logging
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

from pydantic import BaseModel, ConfigDict

from .engine import Engine
from .query_model import ArityError, Database, Query, UpdateCommand
from .workload import Probe, ProbeKind, ProbeValue, StreamCommand, format_probe_result

logger = logging.getLogger(__name__)


def _lookup_plans(q: Query, db: Database) -> List[Tuple[Tuple[int, ...], Dict[Tuple[int, ...], List[Tuple[int, ...]]]]]:
    """Per atom, the positions bound by earlier atoms and the tuples grouped by them."""
    plans = []
    bound: Set[str] = set()
    for atom in q.atoms:
        positions = tuple(position for position, var in enumerate(atom.vars) if var in bound)
        groups: Dict[Tuple[int, ...], List[Tuple[int, ...]]] = {}
        for ids in db.relation(atom.relation):
            groups.setdefault(tuple(ids[position] for position in positions), []).append(ids)
        plans.append((positions, groups))
        bound.update(atom.vars)
    return plans


def eval_naive_ids(q: Query, db: Database) -> Set[Tuple[int, ...]]:
    """
    Projections of all satisfying assignments onto the head, as interned ids.

    Raises:
        ArityError: If a relation is stored with another arity than its atom.
    """
    for atom in q.atoms:
        stored = db.arity(atom.relation)
        if stored is not None and stored != atom.arity:
            raise ArityError(atom.relation, stored, atom.arity)
    atoms = q.atoms
    plans = _lookup_plans(q, db)
    binding: Dict[str, int] = {}
    results: Set[Tuple[int, ...]] = set()

    def extend(index: int) -> None:
        if index == len(atoms):
            results.add(tuple(binding[var] for var in q.head))
            return
        atom = atoms[index]
        positions, groups = plans[index]
        key = tuple(binding[atom.vars[position]] for position in positions)
        for ids in groups.get(key, ()):
            added: List[str] = []
            consistent = True
            for var, ident in zip(atom.vars, ids):
                bound = binding.get(var)
                if bound is None:
                    binding[var] = ident
                    added.append(var)
                elif bound != ident:
                    consistent = False
                    break
            if consistent:
                extend(index + 1)
            for var in added:
                del binding[var]

    extend(0)
    return results


def eval_naive(q: Query, db: Database) -> Set[Tuple[str, ...]]:
    """q(D) as a set of token tuples; a Boolean query yields {()} or the empty set."""
    return {db.decode(ids) for ids in eval_naive_ids(q, db)}


def count_naive(q: Query, db: Database) -> int:
    return len(eval_naive_ids(q, db))


def answer_naive(q: Query, db: Database) -> bool:
    return bool(eval_naive_ids(q, db))


class OracleRecompute:
    """
    Recompute-from-scratch evaluator with the engine's query surface.

    Updates only touch the fact store; every query runs ``eval_naive``.
    """

    def __init__(self, query: Query):
        self.query = query
        self.facts = Database()
        for relation, arity in query.schema().relations.items():
            self.facts.declare(relation, arity)
        self.version = 0

    def load(self, database: Database) -> None:
        for relation, constants in database.facts():
            if self.facts.insert(relation, constants):
                self.version += 1

    def apply(self, command: UpdateCommand) -> bool:
        applied = self.facts.apply(command)
        if applied:
            self.version += 1
        return applied

    def count(self) -> int:
        return count_naive(self.query, self.facts)

    def answer(self) -> bool:
        return answer_naive(self.query, self.facts)

    def enumerate(self) -> List[Tuple[str, ...]]:
        return sorted(eval_naive(self.query, self.facts))


class Mismatch(BaseModel):
    """The first probe on which two evaluators disagree."""

    model_config = ConfigDict(frozen=True)

    command_index: int
    kind: ProbeKind
    engine: str
    oracle: str

    def __str__(self) -> str:
        return (
            f"probe #{self.command_index} ({self.kind.value}): "
            f"engine {self.engine!r} != oracle {self.oracle!r}"
        )


def probe(evaluator: Union[Engine, OracleRecompute], kind: ProbeKind) -> ProbeValue:
    """Answer one probe; enumerations come back sorted."""
    if kind is ProbeKind.COUNT:
        return evaluator.count()
    if kind is ProbeKind.ANSWER:
        return evaluator.answer()
    return sorted(evaluator.enumerate())


def compare_stream(
    q: Query,
    stream: Sequence[StreamCommand],
    snapshot: Optional[Database] = None,
    audit: bool = False,
) -> Optional[Mismatch]:
    """
    Replay ``stream`` on an engine and on the oracle side by side.

    Returns the first disagreeing probe, or None. With ``audit`` the
    engine's internal registers are checked after every update.
    """
    engine = Engine.create(q)
    oracle = OracleRecompute(q)
    if snapshot is not None:
        engine.load(snapshot)
        oracle.load(snapshot)
    for index, command in enumerate(stream):
        if isinstance(command, Probe):
            expected = probe(oracle, command.kind)
            actual = probe(engine, command.kind)
            if actual != expected:
                mismatch = Mismatch(
                    command_index=index,
                    kind=command.kind,
                    engine=format_probe_result(command.kind, actual),
                    oracle=format_probe_result(command.kind, expected),
                )
                logger.info("mismatch for %s: %s", q, mismatch)
                return mismatch
            continue
        engine.apply(command)
        oracle.apply(command)
        if audit:
            engine.audit()
    return None
