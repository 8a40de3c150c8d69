"""Cost and distance functionals: full and sampled backward-pair costs, the
block-decomposition cost estimator, permutation distances, and single-move
cost deltas (exact and sampled)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import OrderedDecomposition, Permutation
from .oracles import PreferenceOracle

# Floating point tolerance for equality assertions on normalized costs.
COST_TOL = 1e-9


@dataclass(frozen=True)
class EdgeSample:
    """Multiset of unordered element pairs drawn from a declared universe."""

    pairs: tuple[tuple[int, int], ...]
    universe: frozenset[int]

    @classmethod
    def of(cls, pairs: Sequence[tuple[int, int]], universe) -> "EdgeSample":
        uni = frozenset(universe)
        norm = []
        for u, v in pairs:
            if u == v or u not in uni or v not in uni:
                raise ValueError(f"pair ({u}, {v}) not inside the declared universe")
            norm.append((u, v) if u < v else (v, u))
        return cls(tuple(norm), uni)

    def __len__(self) -> int:
        return len(self.pairs)

    @classmethod
    def full(cls, universe) -> "EdgeSample":
        """Every unordered pair once."""
        elems = sorted(universe)
        return cls.of([(u, v) for i, u in enumerate(elems) for v in elems[i + 1:]], elems)

    @classmethod
    def uniform(cls, universe, size: int, rng: np.random.Generator) -> "EdgeSample":
        """``size`` uniform draws with repetitions."""
        elems = sorted(universe)
        n = len(elems)
        if n < 2 or size < 1:
            raise ValueError("need at least two elements and one draw")
        flat = rng.integers(0, n * (n - 1) // 2, size=size)

        def base(i: int) -> int:
            return i * (2 * n - i - 1) // 2

        # Unrank the pair index k into (i, j), i < j; the sqrt estimate is
        # corrected to guard against float rounding.
        pairs = []
        for k in flat:
            k = int(k)
            i = int((2 * n - 1 - math.sqrt((2 * n - 1) ** 2 - 8 * k)) / 2)
            i = max(0, min(i, n - 2))
            while i + 1 <= n - 2 and base(i + 1) <= k:
                i += 1
            while i > 0 and base(i) > k:
                i -= 1
            j = k - base(i) + i + 1
            pairs.append((elems[i], elems[j]))
        return cls.of(pairs, elems)


@dataclass(frozen=True)
class DecompositionSample:
    """Per-big-block edge samples E_i = E restricted to block i, together with
    the total draw count |E| over all big blocks."""

    per_block: dict[int, EdgeSample] = field(default_factory=dict)
    big_blocks: frozenset[int] = frozenset()

    def total_size(self) -> int:
        return sum(len(e) for e in self.per_block.values())

    @classmethod
    def uniform(
        cls,
        decomposition: OrderedDecomposition,
        n: int,
        size: int,
        rng: np.random.Generator,
    ) -> "DecompositionSample":
        """``size`` pairs drawn uniformly with repetitions from the union of
        big-block pair sets."""
        big = decomposition.big_block_indices(n)
        weights = np.array(
            [len(decomposition.blocks[i]) * (len(decomposition.blocks[i]) - 1) // 2 for i in big],
            dtype=float,
        )
        if not big or weights.sum() == 0:
            raise ValueError("decomposition has no big blocks to sample from")
        weights /= weights.sum()
        counts = rng.multinomial(size, weights)
        per_block = {}
        for idx, cnt in zip(big, counts):
            if cnt > 0:
                per_block[idx] = EdgeSample.uniform(decomposition.blocks[idx], int(cnt), rng)
        return cls(per_block, frozenset(big))


def mfast_cost(pi: Permutation, oracle: PreferenceOracle) -> int:
    """Total backward cost: sum of W(v, u) over pairs with u before v.

    Touches all (n choose 2) pairs; meant for tests and verification."""
    cost = 0
    order = pi.order
    for i, u in enumerate(order):
        for v in order[i + 1:]:
            cost += oracle.value(v, u)
    return cost


def partial_cost(pi: Permutation, sample: EdgeSample, oracle: PreferenceOracle) -> float:
    """Unbiased estimator of :func:`mfast_cost` from a uniform pair sample:
    (n choose 2) / |E| times the backward count on the sample."""
    if len(sample) == 0:
        raise ValueError("empty edge sample")
    n = len(sample.universe)
    backward = 0
    for u, v in sample.pairs:
        first, second = (u, v) if pi.precedes(u, v) else (v, u)
        backward += oracle.value(second, first)
    return (n * (n - 1) / 2) / len(sample) * backward


def decomp_partial_cost(
    pi: Permutation,
    decomposition: OrderedDecomposition,
    sample: DecompositionSample,
    oracle: PreferenceOracle,
) -> float:
    """Unbiased estimator of the summed within-big-block costs of ``pi``.

    Implements (sum_i (n_i choose 2)) |E|^-1 * sum_i (n_i choose 2)^-1 |E_i|
    C_{E_i}(pi restricted to block i), with empty per-block samples
    contributing zero by convention.
    """
    if not sample.big_blocks:
        raise ValueError("sample declares no big blocks")
    total = sample.total_size()
    if total == 0:
        return 0.0
    pair_mass = sum(
        len(decomposition.blocks[i]) * (len(decomposition.blocks[i]) - 1) // 2
        for i in sample.big_blocks
    )
    acc = 0.0
    for i in sample.big_blocks:
        edges = sample.per_block.get(i)
        if edges is None or len(edges) == 0:
            continue
        block = decomposition.blocks[i]
        n_i = len(block)
        block_pairs = n_i * (n_i - 1) / 2
        c_ei = partial_cost(pi.restricted_to(block), edges, oracle)
        acc += (1.0 / block_pairs) * len(edges) * c_ei
    return pair_mass / total * acc


def c_tilde(
    sigma: Permutation,
    decomposition: OrderedDecomposition,
    sample: DecompositionSample,
    oracle: PreferenceOracle,
    n: int,
    include_cross_term: bool = False,
) -> float:
    """Three-term surrogate cost for permutations respecting the decomposition:
    sampled big-block cost + exact small-block costs + backward cross pairs.

    The cross-block term is constant over all respecting permutations, so it
    is irrelevant to any argmin over that class; it is only evaluated (at
    quadratic query cost) when ``include_cross_term`` is set, for
    verification against the true cost.
    """
    if not sigma.respects(decomposition):
        raise ValueError("sigma does not respect the decomposition")
    big = set(decomposition.big_block_indices(n))
    total = 0.0
    if big:
        total += decomp_partial_cost(sigma, decomposition, sample, oracle)
    for i, block in enumerate(decomposition.blocks):
        if i not in big:
            total += mfast_cost(sigma.restricted_to(block), oracle)
    if include_cross_term:
        blocks = decomposition.blocks
        for i in range(len(blocks)):
            for j in range(i + 1, len(blocks)):
                for u in blocks[i]:
                    for v in blocks[j]:
                        total += oracle.value(v, u)
    return total


def kendall_tau(pi: Permutation, sigma: Permutation) -> int:
    """Number of discordant pairs."""
    if pi.elements() != sigma.elements():
        raise ValueError("permutations are over different element sets")
    order = pi.order
    out = 0
    for i, u in enumerate(order):
        for v in order[i + 1:]:
            if sigma.precedes(v, u):
                out += 1
    return out


def footrule(pi: Permutation, sigma: Permutation) -> int:
    """Sum of absolute rank displacements."""
    if pi.elements() != sigma.elements():
        raise ValueError("permutations are over different element sets")
    return sum(abs(pi.rank_of(u) - sigma.rank_of(u)) for u in pi.order)


def test_move_exact(pi: Permutation, oracle: PreferenceOracle, v: int, i: int) -> int:
    """Exact decrease in cost from moving ``v`` to position ``i``:
    C(pi) - C(pi with v moved).  Queries only the |i - rank(v)| affected pairs."""
    n = len(pi)
    if not 1 <= i <= n:
        raise IndexError(f"position {i} out of range 1..{n}")
    r = pi.rank_of(v)
    if i == r:
        return 0
    delta = 0
    if i > r:
        for pos in range(r + 1, i + 1):
            u = pi.at(pos)
            delta += oracle.value(u, v) - oracle.value(v, u)
    else:
        for pos in range(i, r):
            u = pi.at(pos)
            delta += oracle.value(v, u) - oracle.value(u, v)
    return delta


def test_move_sampled(
    pi: Permutation,
    oracle: PreferenceOracle,
    v: int,
    i: int,
    sample: EdgeSample,
) -> float:
    """Sampled estimator of :func:`test_move_exact` from pairs (v, x).

    Only sample entries whose partner currently sits inside the move interval
    count; others are ignored.  Raises if no entry lands in the interval
    (callers check the success condition first)."""
    n = len(pi)
    if not 1 <= i <= n:
        raise IndexError(f"position {i} out of range 1..{n}")
    r = pi.rank_of(v)
    if i == r:
        return 0.0
    if i > r:
        lo, hi, sign = r + 1, i, 1
    else:
        lo, hi, sign = i, r - 1, -1
    inside = []
    for a, b in sample.pairs:
        if a == v:
            x = b
        elif b == v:
            x = a
        else:
            continue
        if lo <= pi.rank_of(x) <= hi:
            inside.append(x)
    if not inside:
        raise ValueError("no sample entry inside the move interval")
    signed = sum(oracle.value(x, v) - oracle.value(v, x) for x in inside)
    return abs(i - r) / len(inside) * sign * signed
