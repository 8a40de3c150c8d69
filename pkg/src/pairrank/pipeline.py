"""Staged end-to-end runs shared by the CLI and the labeling service.

A run is: QuickSort seed -> recursive decomposition -> exact ordering of
small blocks -> optional improvement polish on the remaining chaos blocks.
Stages consume labels through one ledger; under a hard budget the pipeline
falls back to the last completed stage instead of failing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    OrderedDecomposition,
    Permutation,
    QueryBudgetExceeded,
    QueryLedger,
    make_rng,
)
from .decompose import DecomposeConfig, local_improve, sample_and_rank
from .exact import EXACT_GUARD, brute_force_mfast
from .metrics import DecompositionSample, decomp_partial_cost, mfast_cost
from .oracles import CountedOracle, PreferenceOracle, Tournament
from .quicksort import quicksort_rank

# Polish defaults: lighter ensembles, no size floor, bounded move count.
POLISH_OVERRIDES = {"c_ens": 1.0, "c_small": 1e-9, "max_iter_factor": 0.02}


@dataclass
class PipelineResult:
    permutation: Permutation
    decomposition: OrderedDecomposition
    flags: list[str]
    ledger: QueryLedger
    stage_reached: str  # qsort | decompose | smallblock | polish
    guard_tripped: bool = False
    total_moves: int = 0
    surrogate_cost: float | None = None  # sampled respecting-cost estimate
    budget_exhausted: bool = False


def _solve_small_block(block, counted: CountedOracle) -> Permutation:
    """Exact order of one small block; labels charged to phase smallblock."""
    elems = sorted(block)
    k = len(elems)
    if k == 1:
        return Permutation(elems)
    if k > EXACT_GUARD:
        raise ValueError(f"small block of size {k} exceeds the exact guard")
    counted.set_phase("smallblock")
    idx = {v: i for i, v in enumerate(elems)}
    bits = np.zeros((k, k), dtype=np.int8)
    for i, u in enumerate(elems):
        for v in elems[i + 1:]:
            w = counted.value(u, v)
            bits[idx[u], idx[v]] = w
            bits[idx[v], idx[u]] = 1 - w
    perm, _ = brute_force_mfast(Tournament(bits))
    return Permutation([elems[p] for p in perm.order])


def _surrogate_cost(perm: Permutation, decomposition: OrderedDecomposition,
                    counted: CountedOracle, n: int, config: DecomposeConfig,
                    rng: np.random.Generator) -> float:
    """Respecting-class surrogate used to pick the best restart: sampled
    big-block cost plus exact small-block costs (the cross-block term is
    constant over the respecting class and omitted)."""
    big = decomposition.big_block_indices(n) if n >= 3 else []
    total = 0.0
    counted.set_phase("estimate")
    if big:
        size = config.estimate_sample_size(n)
        sample = DecompositionSample.uniform(decomposition, n, size, rng)
        total += decomp_partial_cost(perm, decomposition, sample, counted)
    counted.set_phase("smallblock")
    for i, block in enumerate(decomposition.blocks):
        if i not in big:
            total += mfast_cost(perm.restricted_to(block), counted)
    return total


def run_pipeline(
    oracle: PreferenceOracle,
    n: int,
    eps: float,
    seed: int,
    config: DecomposeConfig | None = None,
    polish: bool = False,
    polish_config: DecomposeConfig | None = None,
    budget: int | None = None,
    with_surrogate: bool = False,
) -> PipelineResult:
    """One seeded end-to-end run.  With a budget, a stage that runs out of
    labels is abandoned and the result of the last completed stage is kept."""
    config = config or DecomposeConfig(eps=eps)
    rng = make_rng(seed)
    ledger = QueryLedger(budget=budget)
    counted = CountedOracle(oracle, ledger, "qsort")
    elements = list(range(n))

    perm = Permutation(elements)
    decomposition = OrderedDecomposition([elements]) if elements else OrderedDecomposition([])
    out = PipelineResult(perm, decomposition, ["chaos"] * len(decomposition.blocks),
                         ledger, "qsort")

    try:
        perm = quicksort_rank(elements, oracle, rng, ledger, phase="qsort")
        out.permutation = perm
        if n >= 3:
            out.decomposition = OrderedDecomposition([perm.order])
        out.stage_reached = "qsort"

        if n >= 2:
            res = sample_and_rank(perm, counted, eps, n, config, rng)
            out.permutation = res.permutation
            out.decomposition = res.decomposition
            out.flags = res.flags
            out.guard_tripped = res.guard_tripped
            out.total_moves = res.total_moves
        else:
            out.flags = ["small"] * len(out.decomposition.blocks)
        out.stage_reached = "decompose"

        order = []
        for block, flag in zip(res.decomposition.blocks, res.flags):
            sub = res.permutation.restricted_to(block)
            if flag == "small" and len(block) <= EXACT_GUARD:
                sub = _solve_small_block(block, counted)
            order.extend(sub.order)
        out.permutation = Permutation(order)
        out.stage_reached = "smallblock"

        if polish:
            pc = polish_config or DecomposeConfig(
                eps=eps, **POLISH_OVERRIDES
            )
            counted.set_phase("ensemble")
            order = []
            for block, flag in zip(out.decomposition.blocks, out.flags):
                sub = out.permutation.restricted_to(block)
                if flag == "chaos" and len(block) >= 2:
                    sub, st = local_improve(sub, counted, eps, n, pc, rng)
                    out.guard_tripped |= st.guard_tripped
                    out.total_moves += st.moves
                order.extend(sub.order)
            out.permutation = Permutation(order)
            out.stage_reached = "polish"

        if with_surrogate:
            out.surrogate_cost = _surrogate_cost(
                out.permutation, out.decomposition, counted, n, config, rng
            )
    except QueryBudgetExceeded:
        out.budget_exhausted = True
    return out


def run_best_of(
    oracle: PreferenceOracle,
    n: int,
    eps: float,
    seeds: list[int],
    config: DecomposeConfig | None = None,
    polish: bool = False,
) -> tuple[PipelineResult, list[PipelineResult]]:
    """Run one pipeline per seed and keep the one with the smallest
    surrogate cost (ties: first seed).  Returns (best, all)."""
    results = [
        run_pipeline(oracle, n, eps, s, config=config, polish=polish,
                     with_surrogate=True)
        for s in seeds
    ]
    best = min(results, key=lambda r: (r.surrogate_cost, results.index(r)))
    return best, results
