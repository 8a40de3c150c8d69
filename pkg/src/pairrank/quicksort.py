"""Randomized QuickSort over a preference oracle.

Expected O(n log n) pairwise queries and an expected constant-factor
approximation of the optimal backward cost; used to seed the decomposition.
"""

from __future__ import annotations

import numpy as np

from .core import Permutation, QueryLedger
from .oracles import CountedOracle, PreferenceOracle


def quicksort_rank(
    elements,
    oracle: PreferenceOracle,
    rng: np.random.Generator,
    ledger: QueryLedger | None = None,
    phase: str = "qsort",
) -> Permutation:
    """Order ``elements`` by recursive partitioning around uniform pivots.

    Each element is compared against the pivot exactly once per level; W is
    total, so there are no ties.  Iterative (explicit stack) to keep deep
    recursions on adversarial inputs safe.
    """
    items = list(elements)
    if not items:
        return Permutation([])
    counted = CountedOracle(oracle, ledger if ledger is not None else QueryLedger(), phase)
    out: list[int] = []
    stack = [items]
    while stack:
        seg = stack.pop()
        if len(seg) <= 1:
            out.extend(seg)
            continue
        pivot = seg[int(rng.integers(0, len(seg)))]
        left, right = [], []
        for x in seg:
            if x == pivot:
                continue
            if counted.value(x, pivot) == 1:
                left.append(x)
            else:
                right.append(x)
        # Emit left segment first: push right, then pivot, then left.
        stack.append(right)
        stack.append([pivot])
        stack.append(left)
    return Permutation(out)
