"""
Dynamic evaluation of conjunctive queries with q-hierarchical cores.

The engine keeps, per connected component of the query core, one item
per (q-tree node, assignment of the node's root path) that some fact
supports. Every item stores per-atom support counters, its weight (the
number of satisfying extensions below it) and, for free nodes, its free
weight (the number of distinct free-variable projections). Fit items
(weight > 0) are linked into their parent's child list, and every list
carries the sums of its members' weights. With these registers an
update touches a constant number of items, COUNT and ANSWER read a
register, and the cursor walks the lists with constant delay.
"""

import logging
from typing import Dict, Iterator, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from .analysis import Classification, QTree, build_qtree, classify
from .item_list import ItemList
from .query_model import (
    CQError,
    Database,
    Query,
    UpdateCommand,
    UpdateKind,
    component_atom_ids,
)

logger = logging.getLogger(__name__)


class CoreNotQHierarchical(CQError):
    """The query's homomorphic core has no q-tree."""

    def __init__(self, classification: Classification):
        super().__init__(
            f"The core of {classification.query} is not q-hierarchical: {classification.verdict_line()}"
        )
        self.classification = classification


class StaleCursorError(CQError):
    """The engine was updated after the cursor was opened."""


class UnknownVariableError(CQError):
    """The variable is not a node of any q-tree of the core."""


class ChangeSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    applied: bool
    version: int


class ItemKey(BaseModel):
    """An item address: a q-tree node and the constants on its root path."""

    model_config = ConfigDict(frozen=True)

    variable: str
    path_values: Tuple[str, ...]


class ItemSnapshot(BaseModel):
    model_config = ConfigDict(frozen=True)

    exists: bool
    counters: Dict[int, int] = {}
    weight: int = 0
    free_weight: Optional[int] = None


class _EndOfEnumeration:
    _instance: Optional["_EndOfEnumeration"] = None

    def __new__(cls) -> "_EndOfEnumeration":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "EndOfEnumeration"

    def __bool__(self) -> bool:
        return False


END_OF_ENUMERATION = _EndOfEnumeration()


class Node:
    """Per-node layout derived from the q-tree."""

    __slots__ = ("name", "depth", "is_free", "atm", "atoms", "children", "free_children", "items")

    def __init__(self, tree: QTree, name: str):
        self.name = name
        self.depth = len(tree.path(name))
        self.is_free = name in tree.free_subtree
        self.atm = tuple(sorted(tree.atm[name]))
        self.atoms = tuple(sorted(tree.atoms_below(name)))
        self.children = tree.children[name]
        self.free_children = tree.free_children(name)
        self.items: Dict[Tuple[int, ...], Item] = {}


class Item:
    """An item <v, alpha, a>; ``key`` holds alpha's constants followed by a."""

    __slots__ = (
        "node",
        "key",
        "counters",
        "weight",
        "free_weight",
        "children",
        "prev",
        "next",
        "owner",
    )

    def __init__(self, node: Node, key: Tuple[int, ...]):
        self.node = node
        self.key = key
        self.counters: Dict[int, int] = dict.fromkeys(node.atoms, 0)
        self.weight = 0
        self.free_weight = 0
        self.children: Dict[str, ItemList] = {child: ItemList() for child in node.children}
        self.prev: Optional[Item] = None
        self.next: Optional[Item] = None
        self.owner: Optional[ItemList] = None

    @property
    def value(self) -> int:
        return self.key[-1]

    @property
    def present(self) -> bool:
        return any(self.counters.values())

    def reweigh(self) -> None:
        """Recompute weight and free weight from counters and child registers."""
        node = self.node
        weight = 1
        for atom in node.atm:
            weight *= self.counters[atom]
        if weight:
            for child in node.children:
                weight *= self.children[child].total
        self.weight = weight
        if node.is_free:
            free_weight = 0
            if weight:
                free_weight = 1
                for child in node.free_children:
                    free_weight *= self.children[child].free_total
            self.free_weight = free_weight

    def __repr__(self) -> str:
        return f"<Item {self.node.name} {self.key} w={self.weight} fw={self.free_weight}>"


class AtomPlan:
    """How a fact for one atom maps onto its q-tree path."""

    __slots__ = ("atom", "global_atom", "path", "positions", "guard")

    def __init__(self, tree: QTree, nodes: Dict[str, Node], atom: int, global_atom: int):
        variables = tree.component.atoms[atom].vars
        first_position: Dict[str, int] = {}
        guard: List[Tuple[int, int]] = []
        for position, var in enumerate(variables):
            if var in first_position:
                guard.append((first_position[var], position))
            else:
                first_position[var] = position
        path = tree.path(tree.node_of_atom(atom))
        self.atom = atom
        self.global_atom = global_atom
        self.path = tuple(nodes[var] for var in path)
        self.positions = tuple(first_position[var] for var in path)
        self.guard = tuple(guard)

    def matches(self, ids: Tuple[int, ...]) -> bool:
        return all(ids[s] == ids[t] for s, t in self.guard)


class ComponentState:
    """Items, start list and update plans of one connected component."""

    def __init__(self, tree: QTree, atom_ids: List[int]):
        self.tree = tree
        self.atom_ids = tuple(atom_ids)
        self.nodes = {name: Node(tree, name) for name in tree.nodes}
        self.start = ItemList()
        self.has_free = bool(tree.free_subtree)
        self.plans: Dict[str, List[AtomPlan]] = {}
        for local, atom in enumerate(tree.component.atoms):
            plan = AtomPlan(tree, self.nodes, local, atom_ids[local])
            self.plans.setdefault(atom.relation, []).append(plan)

    @property
    def root(self) -> Node:
        return self.nodes[self.tree.root]

    def size(self) -> int:
        """Number of result tuples this component contributes as a factor."""
        if self.has_free:
            return self.start.free_total
        return 1 if self.start.total > 0 else 0


class Engine:
    """
    Maintains the result of a conjunctive query under single-tuple updates.

    Create with ``Engine.create(query)``; the query is replaced by its
    homomorphic core, which must be q-hierarchical.
    """

    def __init__(self, query: Query, classification: Classification):
        self.original_query = query
        self.classification = classification
        self.core = classification.core
        self.head = query.head
        self.facts = Database()
        for relation, arity in query.schema().relations.items():
            self.facts.declare(relation, arity)
        self.components: List[ComponentState] = []
        for ids in component_atom_ids(self.core):
            tree = build_qtree(self.core.subquery(ids))
            self.components.append(ComponentState(tree, ids))
        self.version = 0
        self.step_counter = 0
        self._slots = self._enumeration_slots()

    @classmethod
    def create(cls, query: Query) -> "Engine":
        """
        Build an engine over the empty database.

        Raises:
            CoreNotQHierarchical: If the core of ``query`` is not q-hierarchical.
        """
        classification = classify(query)
        if not classification.core_is_q_hierarchical:
            raise CoreNotQHierarchical(classification)
        engine = cls(query, classification)
        logger.info(
            "engine for %s maintains core %s in %d component(s)",
            query,
            engine.core,
            len(engine.components),
        )
        return engine

    # -- updates -------------------------------------------------------

    def load(self, database: Database) -> None:
        """Insert every fact of ``database`` in its insertion order."""
        loaded = 0
        for relation, constants in database.facts():
            if self.insert(relation, constants):
                loaded += 1
        logger.info("loaded %d new fact(s), %d stored", loaded, len(self.facts))

    def apply(self, command: UpdateCommand) -> ChangeSummary:
        if command.kind is UpdateKind.INSERT:
            applied = self.insert(command.relation, command.constants)
        else:
            applied = self.delete(command.relation, command.constants)
        return ChangeSummary(applied=applied, version=self.version)

    def insert(self, relation: str, constants: Tuple[str, ...]) -> bool:
        ids = self.facts.encode(relation, tuple(constants))
        if not self.facts.insert_ids(relation, ids):
            return False
        self._propagate(relation, ids, 1)
        return True

    def delete(self, relation: str, constants: Tuple[str, ...]) -> bool:
        self.facts.declare(relation, len(constants))
        ids = []
        for token in constants:
            ident = self.facts.constants.lookup(token)
            if ident is None:
                return False
            ids.append(ident)
        key = tuple(ids)
        if not self.facts.delete_ids(relation, key):
            return False
        self._propagate(relation, key, -1)
        return True

    def _propagate(self, relation: str, ids: Tuple[int, ...], delta: int) -> None:
        for component in self.components:
            for plan in component.plans.get(relation, ()):
                if plan.matches(ids):
                    self._walk(component, plan, ids, delta)
        self.version += 1

    def _walk(self, component: ComponentState, plan: AtomPlan, ids: Tuple[int, ...], delta: int) -> None:
        values = tuple(ids[position] for position in plan.positions)
        path = plan.path
        items: List[Item] = []
        for depth, node in enumerate(path):
            self.step_counter += 1
            key = values[: depth + 1]
            item = node.items.get(key)
            if item is None:
                item = Item(node, key)
                node.items[key] = item
            items.append(item)

        for depth in range(len(path) - 1, -1, -1):
            item = items[depth]
            node = path[depth]
            item.counters[plan.atom] += delta
            old_weight, old_free = item.weight, item.free_weight
            item.reweigh()
            owner = items[depth - 1].children[node.name] if depth else component.start
            if item.weight > 0:
                if item.owner is None:
                    owner.push_front(item)
            elif item.owner is not None:
                owner.remove(item)
            owner.total += item.weight - old_weight
            if node.is_free:
                owner.free_total += item.free_weight - old_free
            if delta < 0 and not item.present:
                del node.items[item.key]

    # -- queries -------------------------------------------------------

    def count(self) -> int:
        """|q(D)| as the product of the component registers."""
        result = 1
        for component in self.components:
            result *= component.size()
        return result

    def answer(self) -> bool:
        return all(component.start.total > 0 for component in self.components)

    def open_cursor(self) -> "Cursor":
        return Cursor(self)

    def enumerate(self) -> Iterator[Tuple[str, ...]]:
        """Iterate the query result (in list order)."""
        return iter(self.open_cursor())

    def _enumeration_slots(self) -> List[Tuple[ComponentState, str, Optional[int], int]]:
        """(component, node, parent slot, head position) in document order per component."""
        slots: List[Tuple[ComponentState, str, Optional[int], int]] = []
        head_position = {var: pos for pos, var in enumerate(self.head)}
        for component in self.components:
            placed: Dict[str, int] = {}
            for name in component.tree.doc_order:
                parent = component.tree.parent[name]
                parent_slot = placed[parent] if parent is not None else None
                placed[name] = len(slots)
                slots.append((component, name, parent_slot, head_position[name]))
        return slots

    # -- inspection ----------------------------------------------------

    def _component_of(self, variable: str) -> ComponentState:
        for component in self.components:
            if variable in component.nodes:
                return component
        raise UnknownVariableError(f"{variable} is not a q-tree node of the core {self.core}")

    def find_item(self, variable: str, path_values: Tuple[str, ...]) -> Optional[Item]:
        component = self._component_of(variable)
        node = component.nodes[variable]
        ids = []
        for token in path_values:
            ident = self.facts.constants.lookup(token)
            if ident is None:
                return None
            ids.append(ident)
        return node.items.get(tuple(ids))

    def inspect(self, variable: str, path_values: Tuple[str, ...]) -> ItemSnapshot:
        """Stored counters (by core atom id) and weights of one item."""
        component = self._component_of(variable)
        item = self.find_item(variable, tuple(path_values))
        if item is None:
            return ItemSnapshot(exists=False)
        return ItemSnapshot(
            exists=True,
            counters={component.atom_ids[atom]: value for atom, value in item.counters.items()},
            weight=item.weight,
            free_weight=item.free_weight if item.node.is_free else None,
        )

    def iter_items(self) -> Iterator[Tuple[ComponentState, Item]]:
        for component in self.components:
            for node in component.nodes.values():
                for item in node.items.values():
                    yield component, item

    def decode(self, ids: Tuple[int, ...]) -> Tuple[str, ...]:
        return self.facts.decode(ids)

    def state_snapshot(self) -> Dict[object, object]:
        """Counters, weights and registers keyed by decoded item keys."""
        snapshot: Dict[object, object] = {}
        for index, component in enumerate(self.components):
            snapshot[("start", index)] = (
                component.start.size,
                component.start.total,
                component.start.free_total,
            )
            for node in component.nodes.values():
                for item in node.items.values():
                    registers = {
                        child: (lst.size, lst.total, lst.free_total) for child, lst in item.children.items()
                    }
                    snapshot[(node.name, self.decode(item.key))] = (
                        tuple(sorted(item.counters.items())),
                        item.weight,
                        item.free_weight,
                        tuple(sorted(registers.items())),
                    )
        return snapshot

    def audit(self) -> None:
        """Check presence, list exactness, weights and registers; raise AssertionError."""
        for component in self.components:
            _audit_list(component.start, "start")
            root = component.root
            for node in component.nodes.values():
                for key, item in node.items.items():
                    label = f"{node.name}{self.decode(key)}"
                    if not item.present:
                        raise AssertionError(f"item {label} has no support but is stored")
                    expected_weight, expected_free = item.weight, item.free_weight
                    item.reweigh()
                    if (item.weight, item.free_weight) != (expected_weight, expected_free):
                        raise AssertionError(f"item {label} weights are stale")
                    owner = component.start if node is root else None
                    if node is not root:
                        parent_node = component.nodes[component.tree.parent[node.name]]
                        parent_item = parent_node.items.get(key[:-1])
                        if parent_item is None:
                            raise AssertionError(f"item {label} has no parent item")
                        owner = parent_item.children[node.name]
                    if (item.weight > 0) != (item.owner is owner):
                        raise AssertionError(f"item {label} list membership disagrees with weight {item.weight}")
                    for child, lst in item.children.items():
                        _audit_list(lst, f"{label}/{child}")

    def __repr__(self) -> str:
        return f"<Engine core={self.core} facts={len(self.facts)} version={self.version}>"


def _audit_list(lst: ItemList, label: str) -> None:
    members = list(lst)
    if len(members) != lst.size:
        raise AssertionError(f"list {label} size register is {lst.size}, holds {len(members)}")
    total = sum(member.weight for member in members)
    free_total = sum(member.free_weight for member in members)
    if total != lst.total:
        raise AssertionError(f"list {label} total register is {lst.total}, members sum to {total}")
    if free_total != lst.free_total:
        raise AssertionError(f"list {label} free register is {lst.free_total}, members sum to {free_total}")
    for member in members:
        if member.weight <= 0:
            raise AssertionError(f"list {label} holds unfit item {member}")


class Cursor:
    """
    Constant-delay enumeration over the free subtrees of all components.

    Slots are the free nodes of every component in document order,
    components concatenated in order; advancing the last slot that is not
    at the end of its list and resetting every later slot to the first
    member of its parent's list realises the nested loop over components.
    """

    def __init__(self, engine: Engine):
        self.engine = engine
        self.version = engine.version
        self.slots = engine._slots
        self.items: List[Optional[Item]] = [None] * len(self.slots)
        self.finished = False
        self._pending = False
        if not engine.answer():
            self.finished = True
            return
        self._pending = True
        for slot in range(len(self.slots)):
            self._reset(slot)

    def _reset(self, slot: int) -> None:
        component, name, parent_slot, _ = self.slots[slot]
        self.engine.step_counter += 1
        if parent_slot is None:
            self.items[slot] = component.start.first  # type: ignore[assignment]
        else:
            parent = self.items[parent_slot]
            assert parent is not None
            self.items[slot] = parent.children[name].first  # type: ignore[assignment]

    def _emit(self) -> Tuple[str, ...]:
        values: List[str] = [""] * len(self.engine.head)
        token = self.engine.facts.constants.token
        for slot, (_, _, _, position) in enumerate(self.slots):
            item = self.items[slot]
            assert item is not None
            values[position] = token(item.key[-1])
        return tuple(values)

    def next(self) -> object:
        """The next result tuple, or END_OF_ENUMERATION."""
        if self.engine.version != self.version:
            raise StaleCursorError("The engine changed after the cursor was opened")
        if self.finished:
            return END_OF_ENUMERATION
        if self._pending:
            self._pending = False
            return self._emit()
        for slot in range(len(self.slots) - 1, -1, -1):
            self.engine.step_counter += 1
            item = self.items[slot]
            if item is not None and item.next is not None:
                break
        else:
            self.finished = True
            return END_OF_ENUMERATION
        self.engine.step_counter += 1
        self.items[slot] = item.next  # type: ignore[union-attr]
        for later in range(slot + 1, len(self.slots)):
            self._reset(later)
        return self._emit()

    def __iter__(self) -> "Cursor":
        return self

    def __next__(self) -> Tuple[str, ...]:
        result = self.next()
        if result is END_OF_ENUMERATION:
            raise StopIteration
        return result  # type: ignore[return-value]
