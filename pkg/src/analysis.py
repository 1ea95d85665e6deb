"""
Static analysis of conjunctive queries.

Decides q-hierarchicality (with a violating variable pair), builds
q-trees by repeatedly choosing a variable that occurs in every atom,
computes homomorphic cores by retraction search, and classifies a query
for Boolean answering, counting and enumeration under updates.
"""

import itertools
import logging
from enum import Enum
from typing import Dict, FrozenSet, List, Literal, Optional, Sequence, Tuple

import networkx as nx
from pydantic import BaseModel, ConfigDict

from .query_model import Atom, CQError, Query, atoms_index, connected_components

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    TRACTABLE = "Tractable"
    CONDITIONALLY_HARD = "ConditionallyHard"
    OPEN = "Open"


class Witness(BaseModel):
    """A variable pair violating q-hierarchicality.

    Condition ``"i"``: atoms(x) and atoms(y) overlap but neither contains
    the other. Condition ``"ii"``: atoms(x) is a proper subset of
    atoms(y), x is free and y is quantified.
    """

    model_config = ConfigDict(frozen=True)

    x: str
    y: str
    condition: Literal["i", "ii"]

    def __str__(self) -> str:
        if self.condition == "i":
            return f"({self.x}, {self.y}): atoms overlap without containment"
        return f"({self.x}, {self.y}): free {self.x} is below quantified {self.y}"


class HierarchyCheck(BaseModel):
    """Result of the q-hierarchical test; truthy iff the query passes."""

    model_config = ConfigDict(frozen=True)

    ok: bool
    witness: Optional[Witness] = None

    def __bool__(self) -> bool:
        return self.ok


class NotQHierarchical(CQError):
    """No q-tree exists for a component."""

    def __init__(self, witness: Optional[Witness]):
        detail = f" (witness {witness})" if witness else ""
        super().__init__(f"Query is not q-hierarchical{detail}")
        self.witness = witness


def q_hierarchy_witness(q: Query) -> Optional[Witness]:
    """First violating pair in variable order, or None."""
    index = atoms_index(q)
    free = q.free
    variables = q.variables
    for x, y in itertools.combinations(variables, 2):
        ax, ay = index[x], index[y]
        if ax & ay and not (ax <= ay or ay <= ax):
            return Witness(x=x, y=y, condition="i")
        if ax < ay and x in free and y not in free:
            return Witness(x=x, y=y, condition="ii")
        if ay < ax and y in free and x not in free:
            return Witness(x=y, y=x, condition="ii")
    return None


def is_q_hierarchical(q: Query) -> HierarchyCheck:
    """Check both q-hierarchy conditions for every variable pair."""
    witness = q_hierarchy_witness(q)
    return HierarchyCheck(ok=witness is None, witness=witness)


class QTree(BaseModel):
    """
    A q-tree for one connected component.

    Every atom's variable set is the root path of exactly one node (the
    node that represents it, see ``atm``) and the free variables form a
    connected, root-containing node set. Atom identifiers are positions
    in ``component.atoms``.
    """

    model_config = ConfigDict(frozen=True)

    component: Query
    root: str
    children: Dict[str, Tuple[str, ...]]
    parent: Dict[str, Optional[str]]
    atm: Dict[str, FrozenSet[int]]
    free_subtree: FrozenSet[str]
    doc_order: Tuple[str, ...]

    @property
    def nodes(self) -> Tuple[str, ...]:
        """All nodes in pre-order."""
        ordered: List[str] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            ordered.append(node)
            stack.extend(reversed(self.children[node]))
        return tuple(ordered)

    def path(self, node: str) -> Tuple[str, ...]:
        """Variables from the root down to ``node`` inclusive."""
        steps: List[str] = []
        current: Optional[str] = node
        while current is not None:
            steps.append(current)
            current = self.parent[current]
        return tuple(reversed(steps))

    def atoms_below(self, node: str) -> FrozenSet[int]:
        """atoms(node): identifiers of the atoms that contain ``node``."""
        found = set()
        stack = [node]
        while stack:
            current = stack.pop()
            found.update(self.atm[current])
            stack.extend(self.children[current])
        return frozenset(found)

    def node_of_atom(self, atom_id: int) -> str:
        for node, represented in self.atm.items():
            if atom_id in represented:
                return node
        raise KeyError(atom_id)

    def free_children(self, node: str) -> Tuple[str, ...]:
        return tuple(child for child in self.children[node] if child in self.free_subtree)

    def edges(self) -> List[Tuple[str, str]]:
        return [(node, child) for node in self.nodes for child in self.children[node]]

    def render(self) -> str:
        """Indented text drawing, one node per line."""
        lines: List[str] = []

        def walk(node: str, depth: int) -> None:
            marker = "*" if node in self.free_subtree else " "
            represented = ", ".join(str(self.component.atoms[i]) for i in sorted(self.atm[node]))
            lines.append(f"{'  ' * depth}{marker}{node}  atm={{{represented}}}")
            for child in self.children[node]:
                walk(child, depth + 1)

        walk(self.root, 0)
        return "\n".join(lines)


def _atom_groups(atoms: Sequence[Atom], ids: Sequence[int], ignored: FrozenSet[str]) -> List[List[int]]:
    """Connected groups of ``ids`` linked through variables outside ``ignored``."""
    graph = nx.Graph()
    for ident in ids:
        graph.add_node(("atom", ident))
        for var in atoms[ident].vars:
            if var not in ignored:
                graph.add_edge(("atom", ident), ("var", var))
    groups = [sorted(i for kind, i in nodes if kind == "atom") for nodes in nx.connected_components(graph)]
    groups = [group for group in groups if group]
    groups.sort(key=lambda group: group[0])
    return groups


def build_qtree(component: Query) -> QTree:
    """
    Build the q-tree of a connected query.

    The root is a variable contained in every atom, preferring free
    variables (by head order) and otherwise the first variable in text
    order. It is stripped from all atoms and the remaining atoms are
    split into connected parts, each of which becomes a child subtree.
    Children are ordered by the first textual occurrence of their root.

    Raises:
        NotQHierarchical: If some step has no eligible root.
    """
    atoms = component.atoms
    free = component.free
    text_order = {var: pos for pos, var in enumerate(component.variables)}
    head_order = {var: pos for pos, var in enumerate(component.head)}

    children: Dict[str, Tuple[str, ...]] = {}
    parent: Dict[str, Optional[str]] = {}
    atm: Dict[str, FrozenSet[int]] = {}

    def fail() -> NotQHierarchical:
        return NotQHierarchical(q_hierarchy_witness(component))

    def grow(ids: List[int], placed: FrozenSet[str], above: Optional[str]) -> str:
        remaining = sorted(
            {var for ident in ids for var in atoms[ident].vars} - placed,
            key=text_order.__getitem__,
        )
        eligible = [var for var in remaining if all(var in atoms[ident].var_set for ident in ids)]
        if not eligible:
            raise fail()
        if any(var in free for var in remaining):
            candidates = sorted((var for var in eligible if var in free), key=head_order.__getitem__)
            if not candidates or (above is not None and above not in free):
                raise fail()
        else:
            candidates = eligible
        root = candidates[0]
        parent[root] = above
        inside = placed | {root}
        here = frozenset(ident for ident in ids if atoms[ident].var_set <= inside)
        atm[root] = here
        rest = [ident for ident in ids if ident not in here]
        kids = [grow(group, inside, root) for group in _atom_groups(atoms, rest, inside)]
        children[root] = tuple(sorted(kids, key=text_order.__getitem__))
        return root

    root = grow(list(range(len(atoms))), frozenset(), None)

    doc_order: List[str] = []

    def visit(node: str) -> None:
        doc_order.append(node)
        for child in children[node]:
            if child in free:
                visit(child)

    if root in free:
        visit(root)

    return QTree(
        component=component,
        root=root,
        children=children,
        parent=parent,
        atm=atm,
        free_subtree=frozenset(free),
        doc_order=tuple(doc_order),
    )


def build_qforest(q: Query) -> List[QTree]:
    """One q-tree per connected component, in component order."""
    return [build_qtree(component) for component in connected_components(q)]


def _dedupe_atoms(q: Query) -> Query:
    unique: Dict[Atom, int] = {}
    for ident, atom in enumerate(q.atoms):
        unique.setdefault(atom, ident)
    if len(unique) == len(q.atoms):
        return q
    return q.subquery(list(unique.values()))


def _shrinking_endomorphism(q: Query) -> Optional[List[int]]:
    """
    Search head-fixing endomorphisms in lexicographic order.

    Returns the atom identifiers of the image of the first endomorphism
    whose image misses at least one atom, or None when every
    endomorphism is surjective on atoms.
    """
    atom_set = set(q.atoms)
    variables = q.variables
    movable = [var for var in variables if var not in q.free]
    if not movable:
        return None
    depth_of = {var: depth for depth, var in enumerate(movable)}
    # atoms become checkable once their last movable variable is assigned
    ready: List[List[Atom]] = [[] for _ in movable]
    for atom in q.atoms:
        depths = [depth_of[var] for var in atom.vars if var in depth_of]
        if depths:
            ready[max(depths)].append(atom)

    mapping: Dict[str, str] = {var: var for var in q.head}

    def image(atom: Atom) -> Atom:
        return Atom(relation=atom.relation, vars=tuple(mapping[var] for var in atom.vars))

    def search(depth: int) -> Optional[set]:
        if depth == len(movable):
            mapped = {image(atom) for atom in q.atoms}
            return mapped if len(mapped) < len(atom_set) else None
        var = movable[depth]
        for target in variables:
            mapping[var] = target
            if all(image(atom) in atom_set for atom in ready[depth]):
                found = search(depth + 1)
                if found is not None:
                    return found
        del mapping[var]
        return None

    found = search(0)
    if found is None:
        return None
    return [ident for ident, atom in enumerate(q.atoms) if atom in found]


def homomorphic_core(q: Query) -> Query:
    """
    Minimal equivalent subquery under homomorphisms fixing the head.

    Duplicate atoms are dropped first; then shrinking endomorphisms are
    applied until every endomorphism is surjective.
    """
    current = _dedupe_atoms(q)
    while True:
        image = _shrinking_endomorphism(current)
        if image is None:
            return current
        current = current.subquery(image)


def _query_graph(q: Query) -> nx.Graph:
    """
    Bipartite atom/variable graph of ``q``.

    Atom nodes carry their relation, variable nodes their head position
    (-1 when quantified), and every edge the argument positions at which
    the variable occurs in the atom.
    """
    graph = nx.Graph()
    head_position = {var: pos for pos, var in enumerate(q.head)}
    for var in q.variables:
        graph.add_node(("var", var), label=("var", head_position.get(var, -1)))
    for index, atom in enumerate(dict.fromkeys(q.atoms)):
        graph.add_node(("atom", index), label=("atom", atom.relation))
        for position, var in enumerate(atom.vars):
            edge = (("atom", index), ("var", var))
            if graph.has_edge(*edge):
                graph.edges[edge]["positions"] |= {position}
            else:
                graph.add_edge(*edge, positions={position})
    return graph


def isomorphic(first: Query, second: Query) -> bool:
    """True if a variable bijection maps one query onto the other, head to head."""
    if len(first.head) != len(second.head):
        return False
    return nx.is_isomorphic(
        _query_graph(first),
        _query_graph(second),
        node_match=lambda a, b: a["label"] == b["label"],
        edge_match=lambda a, b: a["positions"] == b["positions"],
    )


class Classification(BaseModel):
    """Tractability verdicts for the three dynamic evaluation tasks."""

    model_config = ConfigDict(frozen=True)

    query: Query
    is_q_hierarchical: bool
    witness: Optional[Witness] = None
    self_join_free: bool
    core: Query
    core_is_q_hierarchical: bool
    closure_core: Query
    closure_core_is_q_hierarchical: bool
    boolean_verdict: Verdict
    counting_verdict: Verdict
    enumeration_verdict: Verdict

    def verdict_line(self) -> str:
        return (
            f"verdicts boolean={self.boolean_verdict.value} "
            f"counting={self.counting_verdict.value} "
            f"enumeration={self.enumeration_verdict.value}"
        )

    def report(self) -> str:
        """Human-readable report followed by the machine-readable verdict line."""
        lines = [
            f"query: {self.query}",
            f"self-join free: {'yes' if self.self_join_free else 'no'}",
            f"q-hierarchical: {'yes' if self.is_q_hierarchical else 'no'}",
        ]
        if self.witness is not None:
            lines.append(f"  violated by {self.witness} (condition {self.witness.condition})")
        lines.append(f"core: {self.core}")
        lines.append(f"core q-hierarchical: {'yes' if self.core_is_q_hierarchical else 'no'}")
        lines.append(f"core of Boolean closure: {self.closure_core}")
        lines.append(
            f"closure core q-hierarchical: {'yes' if self.closure_core_is_q_hierarchical else 'no'}"
        )
        lines.append(f"boolean answering: {self.boolean_verdict.value}")
        lines.append(f"counting: {self.counting_verdict.value}")
        lines.append(f"enumeration: {self.enumeration_verdict.value}")
        lines.append(self.verdict_line())
        return "\n".join(lines)


def classify(q: Query) -> Classification:
    """Classify Boolean answering, counting and enumeration of ``q`` under updates."""
    witness = q_hierarchy_witness(q)
    core = homomorphic_core(q)
    core_ok = q_hierarchy_witness(core) is None
    closure_core = homomorphic_core(q.existential_closure())
    closure_ok = q_hierarchy_witness(closure_core) is None

    if core_ok:
        enumeration = Verdict.TRACTABLE
    elif q.is_self_join_free and witness is not None:
        enumeration = Verdict.CONDITIONALLY_HARD
    else:
        enumeration = Verdict.OPEN

    result = Classification(
        query=q,
        is_q_hierarchical=witness is None,
        witness=witness,
        self_join_free=q.is_self_join_free,
        core=core,
        core_is_q_hierarchical=core_ok,
        closure_core=closure_core,
        closure_core_is_q_hierarchical=closure_ok,
        boolean_verdict=Verdict.TRACTABLE if closure_ok else Verdict.CONDITIONALLY_HARD,
        counting_verdict=Verdict.TRACTABLE if core_ok else Verdict.CONDITIONALLY_HARD,
        enumeration_verdict=enumeration,
    )
    logger.debug("classified %s: %s", q, result.verdict_line())
    return result
