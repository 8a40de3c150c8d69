"""Shared primitives: permutations, ordered decompositions, query accounting.

Positions are 1-based throughout (so formulas read naturally); element ids
are dense 0-based integers.  All value types here are immutable after
construction and safe to share between concurrent readers.
"""

from __future__ import annotations

import json
import math
from typing import Iterable, Sequence

import numpy as np


class QueryBudgetExceeded(RuntimeError):
    """Raised by a ledger when a hard query budget would be exceeded."""


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator: same seed, same draw sequence."""
    return np.random.Generator(np.random.PCG64(seed))


class Permutation:
    """A linear order over a set of element ids.

    ``order[i - 1]`` is the element at position ``i`` (1-based);
    ``rank_of`` is the inverse map.
    """

    __slots__ = ("order", "_rank")

    def __init__(self, order: Sequence[int]):
        self.order: tuple[int, ...] = tuple(int(x) for x in order)
        self._rank: dict[int, int] = {v: i + 1 for i, v in enumerate(self.order)}
        if len(self._rank) != len(self.order):
            raise ValueError("order contains duplicate elements")

    def __len__(self) -> int:
        return len(self.order)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Permutation) and self.order == other.order

    def __hash__(self) -> int:
        return hash(self.order)

    def __repr__(self) -> str:
        return f"Permutation({list(self.order)})"

    def __contains__(self, v: int) -> bool:
        return v in self._rank

    def elements(self) -> frozenset[int]:
        return frozenset(self.order)

    def rank_of(self, v: int) -> int:
        """Position of element ``v`` (1-based)."""
        try:
            return self._rank[v]
        except KeyError:
            raise KeyError(f"element {v} not in permutation") from None

    def at(self, i: int) -> int:
        """Element at position ``i`` (1-based)."""
        if not 1 <= i <= len(self.order):
            raise IndexError(f"position {i} out of range 1..{len(self.order)}")
        return self.order[i - 1]

    def move(self, v: int, i: int) -> "Permutation":
        """New permutation with ``v`` at position ``i``; relative order of the
        remaining elements is unchanged."""
        n = len(self.order)
        if not 1 <= i <= n:
            raise IndexError(f"position {i} out of range 1..{n}")
        r = self.rank_of(v)
        if r == i:
            return self
        rest = [x for x in self.order if x != v]
        rest.insert(i - 1, v)
        return Permutation(rest)

    def restricted_to(self, subset: Iterable[int]) -> "Permutation":
        """Restriction to ``subset``, preserving relative order."""
        keep = set(subset)
        return Permutation([x for x in self.order if x in keep])

    def precedes(self, u: int, v: int) -> bool:
        return self.rank_of(u) < self.rank_of(v)

    def respects(self, decomposition: "OrderedDecomposition") -> bool:
        """True iff every element of an earlier block precedes every element
        of a later block."""
        if decomposition.universe() != self.elements():
            raise ValueError("decomposition does not cover this permutation")
        pos = 0
        for block in decomposition.blocks:
            ranks = sorted(self.rank_of(v) for v in block)
            if ranks != list(range(pos + 1, pos + len(block) + 1)):
                return False
            pos += len(block)
        return True

    def to_json(self) -> str:
        return json.dumps(list(self.order))

    @classmethod
    def from_json(cls, text: str) -> "Permutation":
        return cls(json.loads(text))


class OrderedDecomposition:
    """Ordered list of disjoint, non-empty blocks covering a ground set."""

    __slots__ = ("blocks",)

    def __init__(self, blocks: Sequence[Iterable[int]]):
        self.blocks: tuple[frozenset[int], ...] = tuple(
            frozenset(int(x) for x in b) for b in blocks
        )
        if any(not b for b in self.blocks):
            raise ValueError("empty block")
        total = sum(len(b) for b in self.blocks)
        if len(frozenset().union(*self.blocks) if self.blocks else frozenset()) != total:
            raise ValueError("blocks are not pairwise disjoint")

    def __len__(self) -> int:
        return len(self.blocks)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, OrderedDecomposition) and self.blocks == other.blocks

    def __repr__(self) -> str:
        return f"OrderedDecomposition({[sorted(b) for b in self.blocks]})"

    def universe(self) -> frozenset[int]:
        return frozenset().union(*self.blocks) if self.blocks else frozenset()

    def block_of(self, v: int) -> int:
        for i, b in enumerate(self.blocks):
            if v in b:
                return i
        raise KeyError(f"element {v} not in decomposition")

    def big_block_indices(self, n: int) -> list[int]:
        return [i for i, b in enumerate(self.blocks) if not is_small_block(b, n)]

    def to_json(self) -> str:
        return json.dumps([sorted(b) for b in self.blocks])

    @classmethod
    def from_json(cls, text: str) -> "OrderedDecomposition":
        return cls(json.loads(text))


def small_block_threshold(n: int) -> float:
    """Size cutoff below which a block counts as small: log n / log log n,
    natural logs (documented choice; the asymptotics do not fix the base)."""
    if n < 3:
        raise ValueError("instance size must be at least 3")
    return math.log(n) / math.log(math.log(n))


def is_small_block(block: Iterable[int], n: int) -> bool:
    block = block if hasattr(block, "__len__") else list(block)
    return len(block) <= small_block_threshold(n)


class QueryLedger:
    """Counts oracle accesses, one charge per distinct unordered pair.

    The cache stores the answer for the canonical orientation (min, max), so a
    re-asked pair (in either orientation) is answered without a new charge.
    An optional ``budget`` turns the ledger into a hard cap: a charge that
    would exceed it raises :class:`QueryBudgetExceeded` before any charge is
    recorded.
    """

    def __init__(self, budget: int | None = None):
        self.total = 0
        self.per_phase: dict[str, int] = {}
        self.cache: dict[tuple[int, int], int] = {}
        self.budget = budget

    def lookup(self, u: int, v: int) -> int | None:
        """Cached answer for W(u, v), or None if the pair was never paid for."""
        key = (u, v) if u < v else (v, u)
        got = self.cache.get(key)
        if got is None:
            return None
        return got if u < v else 1 - got

    def charge(self, u: int, v: int, answer: int, phase: str) -> None:
        """Record the answer for W(u, v) and charge one query to ``phase``."""
        if u == v:
            raise ValueError("cannot charge a self-pair")
        key = (u, v) if u < v else (v, u)
        if key in self.cache:
            return
        if self.budget is not None and self.total + 1 > self.budget:
            raise QueryBudgetExceeded(f"query budget {self.budget} exhausted")
        self.cache[key] = answer if u < v else 1 - answer
        self.total += 1
        self.per_phase[phase] = self.per_phase.get(phase, 0) + 1

    def snapshot(self) -> dict:
        return {"total": self.total, "per_phase": dict(self.per_phase)}
