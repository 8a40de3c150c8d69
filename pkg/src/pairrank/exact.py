"""Exhaustive verifiers: optimal backward cost by subset DP, best
decomposition-respecting permutation, and the two-sided goodness checker."""

from __future__ import annotations

from dataclasses import dataclass

from .core import OrderedDecomposition, Permutation
from .oracles import PreferenceOracle, Tournament

EXACT_GUARD = 20  # subset DP is exponential in the block size


@dataclass(frozen=True)
class EpsGoodReport:
    """Both sides of the local-chaos and approximate-optimality inequalities,
    evaluated exactly."""

    local_chaos_lhs: float
    local_chaos_rhs: float
    respecting_opt: int
    global_opt: int
    local_chaos_holds: bool
    approx_opt_holds: bool


def _subset_opt(w_mask: list[int], m: int) -> list[int]:
    """g[S] = minimal backward cost of ordering the index set S internally.

    Recurrence over the first-placed element e: placing e before S \\ {e}
    costs popcount((S \\ e) & w_mask[e]) (the remaining elements preferred
    over e), plus the optimum of the rest.
    """
    g = [0] * (1 << m)
    for mask in range(1, 1 << m):
        if mask & (mask - 1) == 0:
            continue
        best = None
        r = mask
        while r:
            low = r & -r
            e = low.bit_length() - 1
            r ^= low
            rest = mask ^ low
            cand = (rest & w_mask[e]).bit_count() + g[rest]
            if best is None or cand < best:
                best = cand
        g[mask] = best
    return g


def brute_force_mfast(t: Tournament, elements=None) -> tuple[Permutation, int]:
    """Global minimizer of the backward cost over all permutations of
    ``elements`` (default: all of V).  Subset DP, O(2^m * m); among optimal
    orders the lexicographically smallest (by element id sequence) is
    returned."""
    elems = sorted(elements) if elements is not None else list(range(t.n))
    m = len(elems)
    if m > EXACT_GUARD:
        raise ValueError(f"exact solve capped at {EXACT_GUARD} elements, got {m}")
    if m == 0:
        return Permutation([]), 0
    bits = t.bits
    # w_mask[e]: bit f set iff W(elems[f], elems[e]) = 1, i.e. f preferred to e.
    w_mask = [0] * m
    for e in range(m):
        acc = 0
        for f in range(m):
            if f != e and bits[elems[f], elems[e]]:
                acc |= 1 << f
        w_mask[e] = acc
    g = _subset_opt(w_mask, m)
    full = (1 << m) - 1
    best = g[full]
    # Greedy reconstruction: smallest element extendable to an optimal order.
    order = []
    mask = full
    while mask:
        r = mask
        while r:
            low = r & -r
            e = low.bit_length() - 1
            r ^= low
            rest = mask ^ low
            if (rest & w_mask[e]).bit_count() + g[rest] == g[mask]:
                order.append(elems[e])
                mask = rest
                break
    return Permutation(order), int(best)


def best_respecting(
    decomposition: OrderedDecomposition, t: Tournament
) -> tuple[Permutation, int]:
    """Minimizer of the backward cost over permutations respecting the
    decomposition.

    The cross-block contribution is identical for every respecting
    permutation, so minimizing each block independently is globally optimal
    within the class; the returned cost includes the cross-block violations.
    """
    order: list[int] = []
    within = 0
    for block in decomposition.blocks:
        perm, cost = brute_force_mfast(t, block)
        order.extend(perm.order)
        within += cost
    cross = 0
    blocks = decomposition.blocks
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            for u in blocks[i]:
                for v in blocks[j]:
                    cross += t.value(v, u)
    return Permutation(order), within + cross


def check_eps_good(
    decomposition: OrderedDecomposition, t: Tournament, eps: float
) -> EpsGoodReport:
    """Exact evaluation of both goodness conditions.

    The local-chaos left side decouples over blocks: the restriction of a
    global permutation to a block ranges over all orders of that block
    independently, so the minimum of the summed big-block costs equals the
    sum of per-block optima.
    """
    n = t.n
    big = decomposition.big_block_indices(n)
    chaos_lhs = 0.0
    chaos_rhs = 0.0
    for i in big:
        block = decomposition.blocks[i]
        _, cost = brute_force_mfast(t, block)
        chaos_lhs += cost
        n_i = len(block)
        chaos_rhs += eps * eps * n_i * (n_i - 1) / 2
    _, respecting = best_respecting(decomposition, t)
    _, global_opt = brute_force_mfast(t)
    return EpsGoodReport(
        local_chaos_lhs=chaos_lhs,
        local_chaos_rhs=chaos_rhs,
        respecting_opt=respecting,
        global_opt=global_opt,
        local_chaos_holds=chaos_lhs >= chaos_rhs,
        approx_opt_holds=respecting <= (1 + eps) * global_opt + 1e-9,
    )
