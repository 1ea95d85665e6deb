"""
Query and database model for conjunctive queries.

This module holds the immutable query AST (schema, atoms, queries), the
mutable fact store used by the engine and the oracle, update commands,
and the structural helpers (connected components, atom index) that the
analysis layer builds on.
"""

from collections import Counter
from enum import Enum
from typing import Dict, FrozenSet, Iterator, List, Optional, Tuple

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field, model_validator


class CQError(Exception):
    """Base class for every error raised by the package."""


class ParseError(CQError):
    """Malformed query, snapshot or stream text."""

    def __init__(
        self,
        message: str,
        line: Optional[int] = None,
        column: Optional[int] = None,
    ):
        location = ""
        if line is not None:
            location = f"line {line}"
            if column is not None:
                location += f", column {column}"
            location += ": "
        super().__init__(f"{location}{message}")
        self.message = message
        self.line = line
        self.column = column


class ArityError(CQError):
    """A tuple does not match the arity recorded for its relation."""

    def __init__(self, relation: str, expected: Optional[int], actual: int):
        if expected is None:
            message = f"Unknown relation {relation}/{actual}"
        else:
            message = f"Relation {relation} has arity {expected}, got a {actual}-tuple"
        super().__init__(message)
        self.relation = relation
        self.expected = expected
        self.actual = actual


class Schema(BaseModel):
    """Relation symbols with their arities."""

    model_config = ConfigDict(frozen=True)

    relations: Dict[str, int] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _positive_arities(self) -> "Schema":
        for name, arity in self.relations.items():
            if arity < 1:
                raise ValueError(f"Relation {name} must have arity >= 1, got {arity}")
        return self

    def arity(self, relation: str) -> Optional[int]:
        return self.relations.get(relation)

    def __contains__(self, relation: object) -> bool:
        return relation in self.relations


class Atom(BaseModel):
    """A relational atom R(z1, ..., zr) over variables."""

    model_config = ConfigDict(frozen=True)

    relation: str
    vars: Tuple[str, ...]

    @model_validator(mode="after")
    def _not_nullary(self) -> "Atom":
        if not self.vars:
            raise ValueError(f"Atom {self.relation} needs at least one variable")
        return self

    @property
    def arity(self) -> int:
        return len(self.vars)

    @property
    def var_set(self) -> FrozenSet[str]:
        return frozenset(self.vars)

    def __str__(self) -> str:
        return f"{self.relation}({','.join(self.vars)})"


class Query(BaseModel):
    """
    A conjunctive query ``name(head) :- atom, ..., atom.``

    Body variables that do not occur in the head are existentially
    quantified. Atom identifiers are positions in ``atoms``.
    """

    model_config = ConfigDict(frozen=True)

    name: str = "Q"
    head: Tuple[str, ...] = ()
    atoms: Tuple[Atom, ...]

    @model_validator(mode="after")
    def _well_formed(self) -> "Query":
        if not self.atoms:
            raise ValueError("A query needs at least one atom")
        seen = set()
        for var in self.head:
            if var in seen:
                raise ValueError(f"Duplicate head variable {var}")
            seen.add(var)
        body = set()
        for atom in self.atoms:
            body.update(atom.vars)
        missing = [var for var in self.head if var not in body]
        if missing:
            raise ValueError(f"Head variable {missing[0]} does not occur in the body")
        arities: Dict[str, int] = {}
        for atom in self.atoms:
            known = arities.setdefault(atom.relation, atom.arity)
            if known != atom.arity:
                raise ValueError(
                    f"Relation {atom.relation} used with arities {known} and {atom.arity}"
                )
        return self

    @property
    def variables(self) -> Tuple[str, ...]:
        """All variables, ordered by first occurrence in the body."""
        ordered: Dict[str, None] = {}
        for atom in self.atoms:
            for var in atom.vars:
                ordered.setdefault(var, None)
        return tuple(ordered)

    @property
    def all_vars(self) -> FrozenSet[str]:
        return frozenset(self.variables)

    @property
    def free(self) -> FrozenSet[str]:
        return frozenset(self.head)

    @property
    def quantified(self) -> Tuple[str, ...]:
        return tuple(var for var in self.variables if var not in self.free)

    @property
    def is_boolean(self) -> bool:
        return not self.head

    @property
    def is_self_join_free(self) -> bool:
        relations = [atom.relation for atom in self.atoms]
        return len(relations) == len(set(relations))

    def schema(self) -> Schema:
        """Schema inferred from the atoms."""
        return Schema(relations={atom.relation: atom.arity for atom in self.atoms})

    def existential_closure(self) -> "Query":
        """The Boolean query obtained by quantifying every head variable."""
        return Query(name=self.name, head=(), atoms=self.atoms)

    def subquery(self, atom_ids: List[int]) -> "Query":
        """Keep the given atoms (in query order) and the head variables they mention."""
        kept = [self.atoms[i] for i in sorted(set(atom_ids))]
        body = {var for atom in kept for var in atom.vars}
        return Query(
            name=self.name,
            head=tuple(var for var in self.head if var in body),
            atoms=tuple(kept),
        )

    def __str__(self) -> str:
        body = ", ".join(str(atom) for atom in self.atoms)
        return f"{self.name}({','.join(self.head)}) :- {body}."


class UpdateKind(str, Enum):
    INSERT = "insert"
    DELETE = "delete"


class UpdateCommand(BaseModel):
    """Insert or delete one fact R(c1, ..., cr)."""

    model_config = ConfigDict(frozen=True)

    kind: UpdateKind
    relation: str
    constants: Tuple[str, ...]

    @classmethod
    def insert(cls, relation: str, *constants: str) -> "UpdateCommand":
        return cls(kind=UpdateKind.INSERT, relation=relation, constants=tuple(constants))

    @classmethod
    def delete(cls, relation: str, *constants: str) -> "UpdateCommand":
        return cls(kind=UpdateKind.DELETE, relation=relation, constants=tuple(constants))

    def inverse(self) -> "UpdateCommand":
        kind = UpdateKind.DELETE if self.kind is UpdateKind.INSERT else UpdateKind.INSERT
        return UpdateCommand(kind=kind, relation=self.relation, constants=self.constants)


class ConstantPool:
    """
    Interns constant tokens to dense non-negative integers.

    Identifiers are never released: a constant whose last fact is deleted
    keeps its id, so a stream of fresh constants grows the pool even when
    the database does not grow. The active domain is tracked separately
    by the database.
    """

    __slots__ = ("_ids", "_tokens")

    def __init__(self) -> None:
        self._ids: Dict[str, int] = {}
        self._tokens: List[str] = []

    def intern(self, token: str) -> int:
        ident = self._ids.get(token)
        if ident is None:
            ident = len(self._tokens)
            self._ids[token] = ident
            self._tokens.append(token)
        return ident

    def lookup(self, token: str) -> Optional[int]:
        return self._ids.get(token)

    def token(self, ident: int) -> str:
        return self._tokens[ident]

    def __len__(self) -> int:
        return len(self._tokens)


Fact = Tuple[str, Tuple[int, ...]]


class Database:
    """
    A finite set of facts with interned constants.

    Facts are kept in insertion order. When no schema is given, the
    arity of a relation is fixed by its first fact.
    """

    def __init__(
        self,
        schema: Optional[Schema] = None,
        constants: Optional[ConstantPool] = None,
    ):
        self.schema = schema
        self.constants = constants if constants is not None else ConstantPool()
        self._arities: Dict[str, int] = dict(schema.relations) if schema else {}
        self._facts: Dict[Fact, None] = {}
        self._relations: Dict[str, set] = {}
        self._occurrences: Counter = Counter()

    def _check_arity(self, relation: str, size: int) -> None:
        expected = self._arities.get(relation)
        if expected is None:
            if self.schema is not None:
                raise ArityError(relation, None, size)
            if size < 1:
                raise ArityError(relation, 1, size)
            self._arities[relation] = size
        elif expected != size:
            raise ArityError(relation, expected, size)

    def encode(self, relation: str, constants: Tuple[str, ...]) -> Tuple[int, ...]:
        self._check_arity(relation, len(constants))
        return tuple(self.constants.intern(token) for token in constants)

    def decode(self, ids: Tuple[int, ...]) -> Tuple[str, ...]:
        return tuple(self.constants.token(ident) for ident in ids)

    def arity(self, relation: str) -> Optional[int]:
        return self._arities.get(relation)

    def declare(self, relation: str, arity: int) -> None:
        """Fix the arity of a relation before any fact arrives."""
        self._check_arity(relation, arity)

    def insert_ids(self, relation: str, ids: Tuple[int, ...]) -> bool:
        """Add an encoded fact; False if it was already present."""
        fact = (relation, ids)
        if fact in self._facts:
            return False
        self._facts[fact] = None
        self._relations.setdefault(relation, set()).add(ids)
        self._occurrences.update(set(ids))
        return True

    def delete_ids(self, relation: str, ids: Tuple[int, ...]) -> bool:
        """Remove an encoded fact; False if it was absent."""
        fact = (relation, ids)
        if fact not in self._facts:
            return False
        del self._facts[fact]
        self._relations[relation].discard(ids)
        for ident in set(ids):
            self._occurrences[ident] -= 1
            if self._occurrences[ident] == 0:
                del self._occurrences[ident]
        return True

    def insert(self, relation: str, constants: Tuple[str, ...]) -> bool:
        return self.insert_ids(relation, self.encode(relation, tuple(constants)))

    def delete(self, relation: str, constants: Tuple[str, ...]) -> bool:
        self._check_arity(relation, len(constants))
        ids = []
        for token in constants:
            ident = self.constants.lookup(token)
            if ident is None:
                return False
            ids.append(ident)
        return self.delete_ids(relation, tuple(ids))

    def apply(self, command: UpdateCommand) -> bool:
        if command.kind is UpdateKind.INSERT:
            return self.insert(command.relation, command.constants)
        return self.delete(command.relation, command.constants)

    def contains(self, relation: str, constants: Tuple[str, ...]) -> bool:
        ids = []
        for token in constants:
            ident = self.constants.lookup(token)
            if ident is None:
                return False
            ids.append(ident)
        return (relation, tuple(ids)) in self._facts

    def relation(self, relation: str) -> set:
        """Encoded tuples of one relation (live view, do not mutate)."""
        return self._relations.get(relation, set())

    def relation_names(self) -> List[str]:
        return list(self._arities)

    def fact_ids(self) -> Iterator[Fact]:
        return iter(list(self._facts))

    def facts(self) -> Iterator[Tuple[str, Tuple[str, ...]]]:
        """Facts in insertion order, decoded to tokens."""
        for relation, ids in list(self._facts):
            yield relation, self.decode(ids)

    @property
    def active_domain(self) -> FrozenSet[str]:
        return frozenset(self.constants.token(ident) for ident in self._occurrences)

    @property
    def adom_size(self) -> int:
        return len(self._occurrences)

    def norm(self) -> int:
        """||D||: schema size, domain size and total tuple width."""
        width = sum(len(ids) for _, ids in self._facts)
        return len(self._arities) + self.adom_size + width

    def copy(self) -> "Database":
        clone = Database(self.schema, self.constants)
        clone._arities = dict(self._arities)
        for relation, ids in self._facts:
            clone.insert_ids(relation, ids)
        return clone

    def __len__(self) -> int:
        return len(self._facts)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Database):
            return NotImplemented
        return set(self.facts()) == set(other.facts())

    def __repr__(self) -> str:
        return f"<Database facts={len(self)} adom={self.adom_size}>"


def component_atom_ids(q: Query) -> List[List[int]]:
    """
    Partition atom identifiers by variable connectivity.

    Components are ordered by their first atom; atom identifiers inside a
    component are ascending.
    """
    graph = nx.Graph()
    for index, atom in enumerate(q.atoms):
        graph.add_node(("atom", index))
        for var in atom.vars:
            graph.add_edge(("atom", index), ("var", var))
    components = []
    for nodes in nx.connected_components(graph):
        ids = sorted(ident for kind, ident in nodes if kind == "atom")
        components.append(ids)
    components.sort(key=lambda ids: ids[0])
    return components


def connected_components(q: Query) -> List[Query]:
    """Split a query into connected subqueries, each with its own head variables."""
    return [q.subquery(ids) for ids in component_atom_ids(q)]


def atoms_index(q: Query) -> Dict[str, FrozenSet[int]]:
    """Map every variable to the identifiers of the atoms containing it."""
    index: Dict[str, set] = {var: set() for var in q.variables}
    for ident, atom in enumerate(q.atoms):
        for var in atom.vars:
            index[var].add(ident)
    return {var: frozenset(ids) for var, ids in index.items()}
