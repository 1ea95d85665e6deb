"""
Intrusive doubly linked lists with weight registers.

Members carry their own ``prev``/``next``/``owner`` links, so membership
tests, insertion and removal are O(1) without any per-node allocation.
Each list also holds the registers ``total`` (sum of member weights) and
``free_total`` (sum of member free weights); the engine keeps them
current as member weights change.
"""

from typing import Iterator, Optional, Protocol


class Linked(Protocol):
    prev: Optional["Linked"]
    next: Optional["Linked"]
    owner: Optional["ItemList"]


class ItemList:
    __slots__ = ("first", "last", "size", "total", "free_total")

    def __init__(self) -> None:
        self.first: Optional[Linked] = None
        self.last: Optional[Linked] = None
        self.size = 0
        self.total = 0
        self.free_total = 0

    def push_front(self, node: Linked) -> None:
        """
        Link ``node`` in before the current first member

        before:

            [first] <-> ...

        after:

            [node] <-> [first] <-> ...

        """
        node.owner = self
        node.prev = None
        node.next = self.first
        if self.first is not None:
            self.first.prev = node
        else:
            self.last = node
        self.first = node
        self.size += 1

    def remove(self, node: Linked) -> None:
        if node.owner is not self:
            raise ValueError("node is not a member of this list")
        if node.prev is not None:
            node.prev.next = node.next
        else:
            self.first = node.next
        if node.next is not None:
            node.next.prev = node.prev
        else:
            self.last = node.prev
        node.prev = node.next = None
        node.owner = None
        self.size -= 1

    def __contains__(self, node: object) -> bool:
        return getattr(node, "owner", None) is self

    def __iter__(self) -> Iterator[Linked]:
        node = self.first
        while node is not None:
            yield node
            node = node.next

    def __len__(self) -> int:
        return self.size

    def __bool__(self) -> bool:
        return self.first is not None

    def __repr__(self) -> str:
        return f"<{self.__class__.__name__} size={self.size} total={self.total} free_total={self.free_total}>"
