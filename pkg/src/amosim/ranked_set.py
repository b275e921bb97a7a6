"""Order-statistics set over bounded positive integer ids.

Backed by a Fenwick tree over a fixed universe 1..capacity, which gives
insert/remove/select in O(log capacity) and O(1) membership/size.  Every
tree-node touch increments ``basic_ops`` so complexity properties can be
asserted empirically.
"""

from __future__ import annotations

from typing import Iterable, Iterator, List


class RankError(IndexError):
    """Requested rank falls outside the selectable range."""


class RankedSet:
    """Set of distinct ids in 1..capacity with rank/select support."""

    __slots__ = ("capacity", "_tree", "_member", "_size", "basic_ops")

    def __init__(self, capacity: int, full: bool = False) -> None:
        if capacity < 0:
            raise ValueError("capacity must be nonnegative")
        self.capacity = capacity
        self._member = bytearray(capacity + 1)
        self._size = 0
        self.basic_ops = 0
        if full:
            # O(capacity) bulk build: tree[i] = number of members in i's span.
            self._tree = [0] * (capacity + 1)
            for i in range(1, capacity + 1):
                self._member[i] = 1
                self._tree[i] += 1
                j = i + (i & -i)
                if j <= capacity:
                    self._tree[j] += self._tree[i]
            self._size = capacity
        else:
            self._tree = [0] * (capacity + 1)

    @classmethod
    def from_iterable(cls, capacity: int, items: Iterable[int]) -> "RankedSet":
        s = cls(capacity)
        for x in items:
            s.insert(x)
        return s

    def __len__(self) -> int:
        return self._size

    def __contains__(self, x: int) -> bool:
        return self.contains(x)

    def __iter__(self) -> Iterator[int]:
        member = self._member
        return (i for i in range(1, self.capacity + 1) if member[i])

    def __repr__(self) -> str:  # pragma: no cover
        return f"RankedSet({self.to_list()!r})"

    def _check_range(self, x: int) -> None:
        if not 1 <= x <= self.capacity:
            raise ValueError(f"id {x} outside universe 1..{self.capacity}")

    def contains(self, x: int) -> bool:
        self._check_range(x)
        self.basic_ops += 1
        return bool(self._member[x])

    def insert(self, x: int) -> bool:
        """Add x; returns False (flagging a no-op) if already present."""
        self._check_range(x)
        if self._member[x]:
            self.basic_ops += 1
            return False
        self._member[x] = 1
        self._size += 1
        tree = self._tree
        i = x
        while i <= self.capacity:
            tree[i] += 1
            self.basic_ops += 1
            i += i & -i
        return True

    def remove(self, x: int) -> bool:
        """Discard x; returns False (flagging a no-op) if absent."""
        self._check_range(x)
        if not self._member[x]:
            self.basic_ops += 1
            return False
        self._member[x] = 0
        self._size -= 1
        tree = self._tree
        i = x
        while i <= self.capacity:
            tree[i] -= 1
            self.basic_ops += 1
            i += i & -i
        return True

    def select(self, rank: int) -> int:
        """Return the element with the given 1-based ascending rank."""
        if not 1 <= rank <= self._size:
            raise RankError(f"rank {rank} out of range for size {self._size}")
        tree = self._tree
        pos = 0
        remaining = rank
        half = 1 << (max(self.capacity, 1).bit_length() - 1)
        while half:
            nxt = pos + half
            self.basic_ops += 1
            if nxt <= self.capacity and tree[nxt] < remaining:
                remaining -= tree[nxt]
                pos = nxt
            half >>= 1
        return pos + 1

    def rank_of(self, x: int) -> int:
        """Number of members <= x."""
        self._check_range(x)
        tree = self._tree
        total = 0
        i = x
        while i > 0:
            total += tree[i]
            self.basic_ops += 1
            i -= i & -i
        return total

    def to_list(self) -> List[int]:
        return [i for i in range(1, self.capacity + 1) if self._member[i]]


def select_excluding(s: RankedSet, excluded: Iterable[int], rank: int) -> int:
    """Return the element of ``s`` minus ``excluded`` with the given rank.

    Elements of ``excluded`` outside ``s`` are ignored.  Cost is
    O((|excluded| + 1) * log capacity): the exclusions are walked in
    ascending order, bumping the candidate rank past each one at or below
    the current candidate.
    """
    if rank < 1:
        raise RankError(f"rank {rank} must be >= 1")
    present = sorted(x for x in excluded if s.contains(x))
    r = rank
    size = len(s)
    for x in present:
        if r > size:
            raise RankError(f"rank {rank} exceeds |S \\ X|")
        if x <= s.select(r):
            r += 1
        else:
            break
    if r > size:
        raise RankError(f"rank {rank} exceeds |S \\ X|")
    return s.select(r)
