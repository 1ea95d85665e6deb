"""
Update streams, expected-answer sidecars and workload generators.

Stream grammar, one command per line::

    + R c1 ... cr      insert R(c1, ..., cr)
    - R c1 ... cr      delete R(c1, ..., cr)
    ? count | answer | enum

``%`` starts a comment; blank lines are ignored.

The generators build the database families used by the conditional
lower bounds (OuMv for Boolean answering and enumeration, OV for
counting), random q-hierarchical queries with matching random streams
for differential fuzzing, and scaling workloads for benchmarks.
"""

import logging
import random
from enum import Enum
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .query_model import Atom, CQError, ParseError, Query, UpdateCommand, UpdateKind
from .query_parser import INTEGER_RE, NAME_RE, parse_query

logger = logging.getLogger(__name__)

OUMV_DEFAULT_QUERY = parse_query("Q() :- S(x), E(x,y), T(y).")
OV_QUERY = parse_query("Q(x) :- E(x,y), T(y).")


class WorkloadError(CQError):
    """A generator cannot be applied to the given query or instance."""


class ProbeKind(str, Enum):
    COUNT = "count"
    ANSWER = "answer"
    ENUM = "enum"


class Probe(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: ProbeKind

    def __str__(self) -> str:
        return f"? {self.kind.value}"


StreamCommand = Union[UpdateCommand, Probe]
Stream = List[StreamCommand]
ProbeValue = Union[int, bool, List[Tuple[str, ...]]]

# -- text formats ------------------------------------------------------


def format_command(command: StreamCommand) -> str:
    if isinstance(command, Probe):
        return str(command)
    sign = "+" if command.kind is UpdateKind.INSERT else "-"
    return " ".join((sign, command.relation) + command.constants)


def serialize_stream(stream: Sequence[StreamCommand]) -> str:
    return "".join(format_command(command) + "\n" for command in stream)


def parse_stream(text: str) -> Stream:
    """
    Parse the stream grammar.

    Raises:
        ParseError: With the offending line number.
    """
    stream: Stream = []
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("%", 1)[0].strip()
        if not content:
            continue
        parts = content.split()
        sign = parts[0]
        if sign == "?":
            if len(parts) != 2:
                raise ParseError("A probe is '? count', '? answer' or '? enum'", number)
            try:
                stream.append(Probe(kind=ProbeKind(parts[1])))
            except ValueError:
                raise ParseError(f"Unknown probe {parts[1]!r}", number) from None
            continue
        if sign not in ("+", "-"):
            raise ParseError(f"Expected '+', '-' or '?', found {sign!r}", number, 1)
        if len(parts) < 3:
            raise ParseError("An update needs a relation and at least one constant", number)
        relation, constants = parts[1], parts[2:]
        if not NAME_RE.match(relation):
            raise ParseError(f"Invalid relation symbol {relation!r}", number)
        for token in constants:
            if not (NAME_RE.match(token) or INTEGER_RE.match(token)):
                raise ParseError(f"Invalid constant {token!r}", number)
        kind = UpdateKind.INSERT if sign == "+" else UpdateKind.DELETE
        stream.append(UpdateCommand(kind=kind, relation=relation, constants=tuple(constants)))
    return stream


def format_tuple(values: Tuple[str, ...]) -> str:
    return " ".join(values) if values else "()"


def format_probe_result(kind: ProbeKind, value: ProbeValue) -> str:
    """Render one probe answer: an integer, yes/no, or a sorted block ending in ``#``."""
    if kind is ProbeKind.COUNT:
        return str(value)
    if kind is ProbeKind.ANSWER:
        return "yes" if value else "no"
    lines = [format_tuple(values) for values in sorted(value)]  # type: ignore[arg-type]
    lines.append("#")
    return "\n".join(lines)


def format_expected(results: Sequence[Tuple[ProbeKind, ProbeValue]]) -> str:
    return "".join(format_probe_result(kind, value) + "\n" for kind, value in results)


def parse_expected(text: str, kinds: Sequence[ProbeKind]) -> List[ProbeValue]:
    """Read a sidecar file back, given the kinds of the probes in stream order."""
    lines = iter(enumerate(text.splitlines(), start=1))
    values: List[ProbeValue] = []
    for kind in kinds:
        try:
            number, line = next(lines)
        except StopIteration:
            raise ParseError(f"Sidecar ends before the {kind.value} probe #{len(values) + 1}") from None
        if kind is ProbeKind.COUNT:
            if not INTEGER_RE.match(line.strip()):
                raise ParseError(f"Expected a count, found {line!r}", number)
            values.append(int(line))
        elif kind is ProbeKind.ANSWER:
            if line.strip() not in ("yes", "no"):
                raise ParseError(f"Expected yes or no, found {line!r}", number)
            values.append(line.strip() == "yes")
        else:
            block: List[Tuple[str, ...]] = []
            while line.strip() != "#":
                block.append(() if line.strip() == "()" else tuple(line.split()))
                try:
                    number, line = next(lines)
                except StopIteration:
                    raise ParseError("Unterminated enum block", number) from None
            values.append(block)
    return values


def probe_kinds(stream: Sequence[StreamCommand]) -> List[ProbeKind]:
    return [command.kind for command in stream if isinstance(command, Probe)]


# -- lower-bound instances ---------------------------------------------

BitVector = Tuple[int, ...]


def _check_bits(vector: Sequence[int], size: int, label: str) -> None:
    if len(vector) != size or any(bit not in (0, 1) for bit in vector):
        raise ValueError(f"{label} must be a 0/1 vector of length {size}")


class OuMvInstance(BaseModel):
    """An n x n Boolean matrix and a sequence of vector pairs (u, v)."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1)
    matrix: Tuple[BitVector, ...]
    rounds: Tuple[Tuple[BitVector, BitVector], ...] = ()

    @model_validator(mode="after")
    def _shapes(self) -> "OuMvInstance":
        if len(self.matrix) != self.n:
            raise ValueError(f"matrix must have {self.n} rows")
        for row in self.matrix:
            _check_bits(row, self.n, "matrix row")
        for u, v in self.rounds:
            _check_bits(u, self.n, "u")
            _check_bits(v, self.n, "v")
        return self

    @property
    def expected_bits(self) -> List[int]:
        """u^T M v for every round."""
        bits = []
        for u, v in self.rounds:
            hit = any(
                u[i] and self.matrix[i][j] and v[j] for i in range(self.n) for j in range(self.n)
            )
            bits.append(int(hit))
        return bits

    @classmethod
    def random(cls, n: int, rounds: int, seed: int, density: float = 0.3) -> "OuMvInstance":
        rng = random.Random(seed)

        def bits() -> BitVector:
            return tuple(int(rng.random() < density) for _ in range(n))

        return cls(
            n=n,
            matrix=tuple(bits() for _ in range(n)),
            rounds=tuple((bits(), bits()) for _ in range(rounds)),
        )


class OVInstance(BaseModel):
    """Two lists of d-dimensional Boolean vectors."""

    model_config = ConfigDict(frozen=True)

    d: int = Field(ge=1)
    U: Tuple[BitVector, ...]
    V: Tuple[BitVector, ...]

    @model_validator(mode="after")
    def _shapes(self) -> "OVInstance":
        for vector in self.U + self.V:
            _check_bits(vector, self.d, "vector")
        return self

    @property
    def n(self) -> int:
        return len(self.U)

    def expected_counts(self) -> List[int]:
        """Per v in V, the number of u in U that are not orthogonal to v."""
        return [
            sum(1 for u in self.U if any(a and b for a, b in zip(u, v))) for v in self.V
        ]

    def has_orthogonal_pair(self) -> bool:
        return any(count < self.n for count in self.expected_counts())

    @classmethod
    def random(cls, n: int, d: int, seed: int, density: float = 0.5) -> "OVInstance":
        rng = random.Random(seed)

        def vector() -> BitVector:
            return tuple(int(rng.random() < density) for _ in range(d))

        return cls(
            d=d,
            U=tuple(vector() for _ in range(n)),
            V=tuple(vector() for _ in range(n)),
        )


def _diff_commands(before: Dict[Tuple[str, Tuple[str, ...]], None], after: Dict[Tuple[str, Tuple[str, ...]], None]) -> Stream:
    stream: Stream = [UpdateCommand.delete(rel, *values) for rel, values in before if (rel, values) not in after]
    stream.extend(UpdateCommand.insert(rel, *values) for rel, values in after if (rel, values) not in before)
    return stream


def oumv_pattern(q: Query) -> Tuple[str, str, int, int, int]:
    """
    Variables x, y and atoms containing x only, both, and y only.

    Returns ``(x, y, psi_x, psi_xy, psi_y)``, the first such choice in
    variable order.

    Raises:
        WorkloadError: If the query has no such pattern.
    """
    variables = q.variables
    for position, x in enumerate(variables):
        for y in variables[position + 1 :]:
            only_x = [i for i, atom in enumerate(q.atoms) if x in atom.var_set and y not in atom.var_set]
            both = [i for i, atom in enumerate(q.atoms) if {x, y} <= atom.var_set]
            only_y = [i for i, atom in enumerate(q.atoms) if y in atom.var_set and x not in atom.var_set]
            if only_x and both and only_y:
                return x, y, only_x[0], both[0], only_y[0]
    raise WorkloadError(f"{q} has no variables x, y with atoms over x only, x and y, and y only")


def oumv_database(
    q: Query, pattern: Tuple[str, str, int, int, int], matrix: Sequence[BitVector], u: BitVector, v: BitVector
) -> Dict[Tuple[str, Tuple[str, ...]], None]:
    """The facts of D(q, M, u, v) in generation order."""
    x, y, psi_x, psi_xy, psi_y = pattern
    others = [var for var in q.variables if var not in (x, y)]
    n = len(matrix)
    facts: Dict[Tuple[str, Tuple[str, ...]], None] = {}
    for i in range(n):
        for j in range(n):
            image = {x: f"a{i + 1}", y: f"b{j + 1}"}
            image.update((var, f"c{s + 1}") for s, var in enumerate(others))
            for ident, atom in enumerate(q.atoms):
                if ident == psi_x and not u[i]:
                    continue
                if ident == psi_y and not v[j]:
                    continue
                if ident == psi_xy and not matrix[i][j]:
                    continue
                facts[(atom.relation, tuple(image[var] for var in atom.vars))] = None
    return facts


def gen_oumv(q: Optional[Query], inst: OuMvInstance) -> Tuple[Stream, List[bool]]:
    """
    Stream deciding u^T M v by ANSWER probes against ``q``.

    The stream first builds D(q, M, 0, 0), which holds the matrix and
    filler facts but no encoding of u or v; the first round's vectors
    arrive as plain inserts, like every later switch, so each round is
    exactly the fact difference to D(q, M, u, v) followed by an ANSWER
    probe. The expected answers are the instance's bits.

    Raises:
        WorkloadError: If ``q`` lacks the atom pattern or has self-joins.
    """
    q = q if q is not None else OUMV_DEFAULT_QUERY
    if not q.is_self_join_free:
        raise WorkloadError(f"{q} has a self-join; the matrix encoding needs distinct relations")
    pattern = oumv_pattern(q)
    zero = tuple(0 for _ in range(inst.n))
    current = oumv_database(q, pattern, inst.matrix, zero, zero)
    stream: Stream = [UpdateCommand.insert(rel, *values) for rel, values in current]
    for u, v in inst.rounds:
        following = oumv_database(q, pattern, inst.matrix, u, v)
        stream.extend(_diff_commands(current, following))
        stream.append(Probe(kind=ProbeKind.ANSWER))
        current = following
    expected = [bool(bit) for bit in inst.expected_bits]
    logger.debug("OuMv stream for n=%d: %d commands, %d rounds", inst.n, len(stream), len(inst.rounds))
    return stream, expected


def gen_ov(inst: OVInstance) -> Tuple[Stream, List[int]]:
    """
    Stream probing COUNT of ``Q(x) :- E(x,y), T(y)`` once per vector of V.

    E(a_i, b_j) holds iff the j-th entry of the i-th vector of U is 1; per
    round, T is switched to the support of v. A count below n signals a
    vector of U orthogonal to v.
    """
    stream: Stream = []
    for i, u in enumerate(inst.U):
        stream.extend(UpdateCommand.insert("E", f"a{i + 1}", f"b{j + 1}") for j in range(inst.d) if u[j])
    support: Set[int] = set()
    for v in inst.V:
        following = {j for j in range(inst.d) if v[j]}
        stream.extend(UpdateCommand.delete("T", f"b{j + 1}") for j in sorted(support - following))
        stream.extend(UpdateCommand.insert("T", f"b{j + 1}") for j in sorted(following - support))
        stream.append(Probe(kind=ProbeKind.COUNT))
        support = following
    return stream, inst.expected_counts()


# -- random q-hierarchical queries -------------------------------------


class GeneratorParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_vars: int = Field(default=6, ge=1)
    max_atoms: int = Field(default=5, ge=1)
    max_arity: int = Field(default=3, ge=1)
    domain_size: int = Field(default=20, ge=1)
    stream_len: int = Field(default=500, ge=1)
    probe_rate: float = Field(default=0.2, ge=0.0, le=1.0)
    insert_bias: float = Field(default=0.65, ge=0.0, le=1.0)
    max_probe_gap: int = Field(default=10, ge=1)


class _TreeSketch:
    """A rooted variable tree with a free prefix, before atoms are placed."""

    def __init__(self, names: List[str], parent: List[Optional[int]], free: Set[int]):
        self.names = names
        self.parent = parent
        self.free = free

    def path(self, node: int) -> List[str]:
        steps = []
        current: Optional[int] = node
        while current is not None:
            steps.append(self.names[current])
            current = self.parent[current]
        return list(reversed(steps))

    def leaves(self) -> List[int]:
        inner = {p for p in self.parent if p is not None}
        return [node for node in range(len(self.names)) if node not in inner]


def _sketch_tree(rng: random.Random, names: List[str], params: GeneratorParams, leaf_budget: int, gate: bool) -> _TreeSketch:
    parent: List[Optional[int]] = [None]
    depth = [1]
    kids = [0]
    for _ in names[1:]:
        leaves = sum(1 for count in kids if count == 0)
        options = [node for node in range(len(parent)) if depth[node] < params.max_arity]
        if leaves >= leaf_budget:
            options = [node for node in options if kids[node] == 0]
        if not options:
            break
        chosen = rng.choice(options)
        parent.append(chosen)
        depth.append(depth[chosen] + 1)
        kids.append(0)
        kids[chosen] += 1
    free: Set[int] = set()
    if not gate and rng.random() < 0.85:
        free.add(0)
        for node in range(1, len(parent)):
            if parent[node] in free and rng.random() < 0.6:
                free.add(node)
    return _TreeSketch(names[: len(parent)], parent, free)


def _random_query(rng: random.Random, params: GeneratorParams, self_join_free: bool) -> Query:
    total = rng.randint(1, params.max_vars)
    trees = 2 if total >= 2 and params.max_atoms >= 2 and rng.random() < 0.3 else 1
    split = rng.randint(1, total - 1) if trees == 2 else total
    sizes = [split, total - split] if trees == 2 else [total]
    budgets = [params.max_atoms] if trees == 1 else [max(1, params.max_atoms // 2), params.max_atoms - max(1, params.max_atoms // 2)]

    sketches = []
    offset = 0
    for index, size in enumerate(sizes):
        names = [f"x{offset + k + 1}" for k in range(size)]
        gate = index == 1 and rng.random() < 0.5
        sketches.append(_sketch_tree(rng, names, params, budgets[index], gate))
        offset += size

    paths: List[List[str]] = []
    for index, sketch in enumerate(sketches):
        chosen = [sketch.path(leaf) for leaf in sketch.leaves()]
        extra = budgets[index] - len(chosen)
        for _ in range(rng.randint(0, max(0, extra))):
            chosen.append(sketch.path(rng.randrange(len(sketch.names))))
        paths.extend(chosen)

    atoms: List[Atom] = []
    pool: Dict[int, List[str]] = {}
    for path in paths:
        variables = list(path)
        rng.shuffle(variables)
        if len(variables) < params.max_arity and rng.random() < 0.15:
            variables.insert(rng.randrange(len(variables) + 1), rng.choice(path))
        arity = len(variables)
        same_arity = pool.get(arity, [])
        if not self_join_free and same_arity and rng.random() < 0.3:
            relation = rng.choice(same_arity)
        else:
            relation = f"R{len(atoms) + 1}"
            pool.setdefault(arity, []).append(relation)
        atoms.append(Atom(relation=relation, vars=tuple(variables)))

    head = [sketch.names[node] for sketch in sketches for node in sorted(sketch.free)]
    rng.shuffle(head)
    return Query(name="Q", head=tuple(head), atoms=tuple(atoms))


def valuation_fact(rng: random.Random, atom: Atom, domain: int) -> Tuple[str, ...]:
    """A fact for ``atom`` under a random valuation of its variables."""
    valuation = {var: str(rng.randint(1, domain)) for var in dict.fromkeys(atom.vars)}
    return tuple(valuation[var] for var in atom.vars)


def random_stream(rng: random.Random, q: Query, params: GeneratorParams) -> Stream:
    """
    Valuation-driven updates with interleaved probes.

    Deletions are drawn from the facts currently present, so every delete
    targets a fact inserted earlier and not yet deleted.
    """
    atoms = sorted(q.atoms, key=str)
    present: List[Tuple[str, Tuple[str, ...]]] = []
    present_set: Set[Tuple[str, Tuple[str, ...]]] = set()
    stream: Stream = []
    since_probe = 0
    kinds = list(ProbeKind)
    for _ in range(params.stream_len):
        if present and rng.random() >= params.insert_bias:
            fact = present.pop(rng.randrange(len(present)))
            present_set.discard(fact)
            stream.append(UpdateCommand.delete(fact[0], *fact[1]))
        else:
            atom = rng.choice(atoms)
            fact = (atom.relation, valuation_fact(rng, atom, params.domain_size))
            if fact not in present_set:
                present.append(fact)
                present_set.add(fact)
            stream.append(UpdateCommand.insert(fact[0], *fact[1]))
        since_probe += 1
        if since_probe >= params.max_probe_gap or rng.random() < params.probe_rate:
            stream.append(Probe(kind=rng.choice(kinds)))
            since_probe = 0
    stream.append(Probe(kind=ProbeKind.COUNT))
    stream.append(Probe(kind=ProbeKind.ENUM))
    return stream


def gen_random_qh(
    seed: int,
    params: Optional[GeneratorParams] = None,
    self_join_free: bool = False,
) -> Tuple[Query, Stream]:
    """
    A random q-hierarchical query and a random update stream over it.

    The query is built from up to two random variable trees: every atom's
    variables are a root path of one tree (in shuffled order, sometimes
    with a repeated variable) and the head is a root-containing prefix of
    each tree, empty for a Boolean gate tree. Deterministic in ``seed``.
    """
    params = params or GeneratorParams()
    rng = random.Random(seed)
    query = _random_query(rng, params, self_join_free)
    return query, random_stream(rng, query, params)


def gen_scaling_workload(q: Query, size: int, seed: int, updates: int = 200, probes: int = 10) -> Stream:
    """
    A benchmark stream for domain size ``size``.

    The leading insert block holds about ``2 * size`` facts produced by
    random valuations of all query variables (so the result is nonempty
    and grows with ``size``); it is followed by ``updates`` single-fact
    updates cycling through the atoms, with COUNT, ANSWER and ENUM probes
    spread evenly.
    """
    rng = random.Random(seed)
    variables = q.variables
    atoms = list(dict.fromkeys(q.atoms))
    rounds = max(1, (2 * size) // len(atoms))
    stream: Stream = []
    present: List[Tuple[str, Tuple[str, ...]]] = []
    seen: Set[Tuple[str, Tuple[str, ...]]] = set()

    def add(fact: Tuple[str, Tuple[str, ...]]) -> None:
        stream.append(UpdateCommand.insert(fact[0], *fact[1]))
        if fact not in seen:
            seen.add(fact)
            present.append(fact)

    for _ in range(rounds):
        valuation = {var: str(rng.randint(1, size)) for var in variables}
        for atom in atoms:
            add((atom.relation, tuple(valuation[var] for var in atom.vars)))

    gap = max(1, updates // max(1, probes))
    kinds = list(ProbeKind)
    for step in range(updates):
        atom = atoms[step % len(atoms)]
        if step % 2:
            candidates = [index for index, fact in enumerate(present) if fact[0] == atom.relation]
            if candidates:
                fact = present.pop(rng.choice(candidates))
                seen.discard(fact)
                stream.append(UpdateCommand.delete(fact[0], *fact[1]))
        else:
            add((atom.relation, valuation_fact(rng, atom, size)))
        if (step + 1) % gap == 0:
            stream.append(Probe(kind=kinds[(step // gap) % len(kinds)]))
    return stream
