"""Active-learning ranking from pairwise preference labels.

Orders n items by adaptively querying binary preferences: a randomized
QuickSort seed, a recursive block decomposition with sampled local
improvement, exact small-scale verifiers, and a large-margin preconditioning
pipeline, all behind a query-counting oracle boundary.
"""

from .core import (
    OrderedDecomposition,
    Permutation,
    QueryBudgetExceeded,
    QueryLedger,
    is_small_block,
    make_rng,
    small_block_threshold,
)
from .oracles import CountedOracle, PreferenceOracle, Tournament, make_planted

__all__ = [
    "CountedOracle",
    "OrderedDecomposition",
    "Permutation",
    "PreferenceOracle",
    "QueryBudgetExceeded",
    "QueryLedger",
    "Tournament",
    "is_small_block",
    "make_planted",
    "make_rng",
    "small_block_threshold",
]
