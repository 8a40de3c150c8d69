"""Query-efficient block decomposition.

Pipeline: QuickSort seed, then a recursive divide step that exits early on
small or provably-expensive ("chaos") blocks, and otherwise runs an
approximate greedy improvement loop driven by per-element, per-scale pair
samples.  After a single-element move the sample ensemble is rewritten in
place of a full redraw, preserving its sampling distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    OrderedDecomposition,
    Permutation,
    QueryLedger,
    is_small_block,
    small_block_threshold,
)
from .metrics import EdgeSample, partial_cost, test_move_exact
from .oracles import CountedOracle, PreferenceOracle
from .quicksort import quicksort_rank

# Encoded partner values: real elements are their ids; out-of-range window
# slots are sentinel elements with a fixed rank in every permutation and
# W = 0 against everything (they never cost a query and never enter output).
_SENT_RIGHT = 1 << 40


@dataclass(frozen=True)
class PaddedIndex:
    """Maps window slots (positions that may fall outside 1..N) to encoded
    partner values and back.  Left sentinels occupy ranks <= 0, right
    sentinels ranks > N."""

    n: int

    def encode(self, slot: int, order: tuple[int, ...] | np.ndarray) -> int:
        if 1 <= slot <= self.n:
            return int(order[slot - 1])
        if slot <= 0:
            return slot - 1
        return _SENT_RIGHT + slot

    @staticmethod
    def is_sentinel(code: int) -> bool:
        return code < 0 or code >= _SENT_RIGHT

    @staticmethod
    def sentinel_rank(code: int) -> int:
        return code + 1 if code < 0 else code - _SENT_RIGHT


@dataclass(frozen=True)
class DecomposeConfig:
    """Named constants for every Theta/Omega in the decomposition; defaults
    are calibrated engineering choices, not derived values."""

    eps: float
    c_ens: float = 4.0          # ensemble cell size: c_ens * eps^-2 * ln^2 n
    c_threshold: float = 1.0    # low scale: B = ceil(log2(c_threshold * eps * N / ln n))
    c_chaos: float = 0.25       # chaos exit when estimate >= c_chaos * eps^2 * N^2
    c_cost_sample: float = 4.0  # estimate sample size: c_cost_sample * eps^-4 * ln n
    c_small: float = 1.0        # improvement loop disabled below c_small * eps^-3 * ln^3 n
    success_fraction: float = 0.125   # cell successful if this fraction hits the interval
    max_iter_factor: float = 10.0     # loop guard: factor * eps^-2 * N * ln^2 n
    random_candidates_per_scale: int = 2

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        for name in ("c_ens", "c_threshold", "c_chaos", "c_cost_sample", "c_small",
                     "success_fraction", "max_iter_factor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def cell_size(self, n: int) -> int:
        return max(4, int(round(self.c_ens * self.eps ** -2 * math.log(n) ** 2)))

    def scale_bounds(self, block_size: int, n: int) -> tuple[int, int]:
        """Dyadic window scales [B, L] for a block of ``block_size`` inside a
        root instance of size ``n``."""
        hi = max(1, math.ceil(math.log2(max(2, block_size))))
        raw = self.c_threshold * self.eps * block_size / math.log(n)
        lo = max(1, math.ceil(math.log2(max(2.0, raw))))
        return min(lo, hi), hi

    def improve_size_floor(self, n: int) -> float:
        return self.c_small * self.eps ** -3 * math.log(n) ** 3

    def estimate_sample_size(self, n: int) -> int:
        return max(1, int(round(self.c_cost_sample * self.eps ** -4 * math.log(n))))

    def iteration_guard(self, block_size: int, n: int) -> int:
        return max(1, int(math.ceil(
            self.max_iter_factor * self.eps ** -2 * block_size * math.log(n) ** 2
        )))


class SampleEnsemble:
    """Per-element, per-scale multisets of sampled comparison partners.

    ``cells[(v, i)]`` holds the encoded partners of the m pairs (v, x) whose
    window slot lay within distance 2^i of v's rank when the cell was built
    or last refreshed."""

    def __init__(self, cells: dict[tuple[int, int], np.ndarray], scale_lo: int,
                 scale_hi: int, m: int, n_block: int):
        self.cells = cells
        self.scale_lo = scale_lo
        self.scale_hi = scale_hi
        self.m = m
        self.n_block = n_block

    def copy_shallow(self) -> "SampleEnsemble":
        return SampleEnsemble(dict(self.cells), self.scale_lo, self.scale_hi,
                              self.m, self.n_block)


def _draw_cell(padded: PaddedIndex, order: np.ndarray, rank: int, scale: int,
               m: int, rng: np.random.Generator) -> np.ndarray:
    """m uniform draws from the (sentinel-padded, unclipped) radius-2^scale
    window around ``rank``."""
    radius = 1 << scale
    slots = rng.integers(rank - radius, rank + radius + 1, size=m)
    out = np.empty(m, dtype=np.int64)
    real = (slots >= 1) & (slots <= padded.n)
    out[real] = order[slots[real] - 1]
    left = slots <= 0
    out[left] = slots[left] - 1
    right = slots > padded.n
    out[right] = _SENT_RIGHT + slots[right]
    return out


def build_ensemble(perm: Permutation, eps: float, n: int, config: DecomposeConfig,
                   rng: np.random.Generator) -> SampleEnsemble:
    """Fresh sample ensemble for ``perm`` (block of a root instance of size n)."""
    N = len(perm)
    lo, hi = config.scale_bounds(N, n)
    m = config.cell_size(n)
    order = np.asarray(perm.order, dtype=np.int64)
    padded = PaddedIndex(N)
    cells: dict[tuple[int, int], np.ndarray] = {}
    for r, v in enumerate(perm.order, start=1):
        for i in range(lo, hi + 1):
            cells[(v, i)] = _draw_cell(padded, order, r, i, m, rng)
    return SampleEnsemble(cells, lo, hi, m, N)


def _rank_lookup(perm: Permutation) -> dict[int, int]:
    return {v: i + 1 for i, v in enumerate(perm.order)}


def _cell_ranks(cell: np.ndarray, rank_arr: np.ndarray) -> np.ndarray:
    """Current rank of each encoded partner; sentinels keep their fixed rank."""
    out = np.empty(len(cell), dtype=np.int64)
    left = cell < 0
    right = cell >= _SENT_RIGHT
    real = ~(left | right)
    out[left] = cell[left] + 1
    out[right] = cell[right] - _SENT_RIGHT
    out[real] = rank_arr[cell[real]]
    return out


def _make_rank_array(perm: Permutation) -> np.ndarray:
    """Dense id -> rank array sized to the largest id in the block."""
    size = max(perm.order) + 1 if perm.order else 1
    arr = np.zeros(size, dtype=np.int64)
    for r, v in enumerate(perm.order, start=1):
        arr[v] = r
    return arr


def estimate_block_cost(perm: Permutation, oracle: PreferenceOracle, eps: float,
                        n: int, config: DecomposeConfig,
                        rng: np.random.Generator) -> float:
    """Additive O(eps^2 N^2) cost estimate from a uniform pair sample."""
    if len(perm) < 2:
        return 0.0
    sample = EdgeSample.uniform(perm.order, config.estimate_sample_size(n), rng)
    return partial_cost(perm, sample, oracle)


def _candidate_targets(r: int, scale: int, N: int, config: DecomposeConfig,
                       rng: np.random.Generator) -> list[int]:
    """Probed targets at one scale: both extremes of the dyadic band plus a
    few random in-band positions, clipped to [1, N] and re-filtered so
    ceil(log2 |j - r|) still equals the scale."""
    d_hi = 1 << scale
    d_lo = (1 << (scale - 1)) + 1
    raw = [r + d_hi, r - d_hi]
    for _ in range(config.random_candidates_per_scale):
        d = int(rng.integers(d_lo, d_hi + 1))
        raw.append(r + d if rng.random() < 0.5 else r - d)
    out = []
    for j in raw:
        j = max(1, min(N, j))
        dist = abs(j - r)
        if dist > 0 and math.ceil(math.log2(dist)) == scale and j not in out:
            out.append(j)
    return out


def _evaluate_element(
    ensemble: SampleEnsemble,
    perm: Permutation,
    rank_arr: np.ndarray,
    u: int,
    oracle: PreferenceOracle,
    eps: float,
    n: int,
    config: DecomposeConfig,
    rng: np.random.Generator,
) -> tuple[int, int, float] | None:
    """First (u, j, estimate) clearing the move threshold among u's probed
    targets, or None."""
    N = len(perm)
    ln_n = math.log(n)
    m = ensemble.m
    r = int(rank_arr[u])
    for scale in range(ensemble.scale_lo, ensemble.scale_hi + 1):
        cell = ensemble.cells[(u, scale)]
        candidates = _candidate_targets(r, scale, N, config, rng)
        if not candidates:
            continue
        ranks = _cell_ranks(cell, rank_arr)
        # Per-entry signed contribution W(x, u) - W(u, x), queried lazily:
        # only entries landing inside a successful candidate's move interval
        # cost anything.  Sentinel pairs are 0 by definition (never queried),
        # and self-pairs never land in an interval (rank r is excluded).
        cache: dict[int, int] = {}
        for j in candidates:
            dist = abs(j - r)
            if j > r:
                lo_r, hi_r, sign = r + 1, j, 1
            else:
                lo_r, hi_r, sign = j, r - 1, -1
            mask = (ranks >= lo_r) & (ranks <= hi_r)
            count = int(mask.sum())
            if count < config.success_fraction * m:
                continue  # cell not successful at (u, j)
            total_signed = 0
            for k in np.flatnonzero(mask):
                x = int(cell[k])
                if x < 0 or x >= _SENT_RIGHT:
                    continue
                got = cache.get(x)
                if got is None:
                    got = 2 * oracle.value(x, u) - 1
                    cache[x] = got
                total_signed += got
            estimate = dist / count * sign * total_signed
            if estimate > eps * dist / ln_n:
                return u, j, estimate
    return None


def find_improving_move(
    ensemble: SampleEnsemble,
    perm: Permutation,
    oracle: PreferenceOracle,
    eps: float,
    n: int,
    config: DecomposeConfig,
    rng: np.random.Generator,
) -> tuple[int, int, float] | None:
    """First (element, target, estimate) whose sampled move gain clears
    eps * |j - rank| / ln n, or None.

    Elements are scanned by current rank; per scale the two extreme targets
    and a few random in-band targets are probed (a capped sweep; the
    exhaustive-sweep audit lives in the tests)."""
    rank_arr = _make_rank_array(perm)
    for u in perm.order:
        found = _evaluate_element(ensemble, perm, rank_arr, u, oracle, eps, n,
                                  config, rng)
        if found is not None:
            return found
    return None


def _intervals_subtract(a: list[tuple[int, int]], b: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Set difference of unions of inclusive integer intervals."""
    out = []
    for lo, hi in a:
        pieces = [(lo, hi)]
        for blo, bhi in b:
            nxt = []
            for plo, phi in pieces:
                if bhi < plo or blo > phi:
                    nxt.append((plo, phi))
                    continue
                if plo < blo:
                    nxt.append((plo, blo - 1))
                if phi > bhi:
                    nxt.append((bhi + 1, phi))
            pieces = nxt
        out.extend(pieces)
    return out


def _window_in_old_ranks(rv_new: int, scale: int, r: int, j: int) -> list[tuple[int, int]]:
    """The new-permutation window of ``rv_new`` expressed as old-rank slots.

    The move u: r -> j permutes the occupied slots only inside [min(r,j),
    max(r,j)]; outside it, and on all sentinel slots, old and new ranks agree.
    """
    radius = 1 << scale
    lo_w, hi_w = rv_new - radius, rv_new + radius
    lo_m, hi_m = (r, j) if j > r else (j, r)
    pieces: list[tuple[int, int]] = []
    outside = _intervals_subtract([(lo_w, hi_w)], [(lo_m, hi_m)])
    pieces.extend(outside)
    inner = _intervals_subtract([(lo_w, hi_w)], outside)
    for plo, phi in inner:
        if j > r:
            # new slot q in [r, j-1] holds the element from old slot q+1;
            # new slot j holds u (old slot r).
            if phi >= j >= plo:
                pieces.append((r, r))
            shift_lo, shift_hi = max(plo, lo_m), min(phi, j - 1)
            if shift_lo <= shift_hi:
                pieces.append((shift_lo + 1, shift_hi + 1))
        else:
            # new slot q in [j+1, r] holds the element from old slot q-1;
            # new slot j holds u (old slot r).
            if phi >= j >= plo:
                pieces.append((r, r))
            shift_lo, shift_hi = max(plo, j + 1), min(phi, hi_m)
            if shift_lo <= shift_hi:
                pieces.append((shift_lo - 1, shift_hi - 1))
    pieces.sort()
    return pieces


def _new_rank_of_slot(p: int, n_block: int, r: int, j: int) -> int:
    """Rank under the moved permutation of the element occupying old slot p."""
    if p < 1 or p > n_block:
        return p  # sentinel
    if p == r:
        return j
    if j > r:
        return p - 1 if r < p <= j else p
    return p + 1 if j <= p < r else p


def _multiset_symdiff(a: np.ndarray, b: np.ndarray) -> int:
    values, counts = np.unique(np.concatenate([a, b]), return_counts=True)
    va, ca = np.unique(a, return_counts=True)
    vb, cb = np.unique(b, return_counts=True)
    da = dict(zip(va.tolist(), ca.tolist()))
    db = dict(zip(vb.tolist(), cb.tolist()))
    return sum(abs(da.get(v, 0) - db.get(v, 0)) for v in values.tolist())


def refresh_ensemble(
    ensemble: SampleEnsemble,
    perm: Permutation,
    u: int,
    j: int,
    config: DecomposeConfig,
    rng: np.random.Generator,
) -> tuple[SampleEnsemble, int]:
    """Rewrite the ensemble so it is distributed as a fresh draw for
    ``perm`` with ``u`` moved to position ``j``.

    Cells whose window contents are unaffected are shared unchanged.  For an
    affected cell of v != u the (equal-size, sentinel-padded) old and new
    windows differ in a handful of slots; entries on outgoing slots are
    relabeled through a rank-ordered matching to the incoming slots, which
    maps the uniform distribution on the old window to the uniform
    distribution on the new one.  The moved element's own cells are redrawn
    from scratch.  Returns the new ensemble and the multiset symmetric
    difference against the input (new pairs that may cost fresh queries).
    """
    N = ensemble.n_block
    r = perm.rank_of(u)
    padded = PaddedIndex(N)
    old_order = np.asarray(perm.order, dtype=np.int64)
    new_perm = perm.move(u, j)
    new_order = np.asarray(new_perm.order, dtype=np.int64)
    out = ensemble.copy_shallow()
    dist = 0

    # Moved element: redraw every scale around the new rank.
    for scale in range(ensemble.scale_lo, ensemble.scale_hi + 1):
        fresh = _draw_cell(padded, new_order, j, scale, ensemble.m, rng)
        dist += _multiset_symdiff(ensemble.cells[(u, scale)], fresh)
        out.cells[(u, scale)] = fresh

    if j == r:
        return out, dist

    lo_m, hi_m = (r, j) if j > r else (j, r)
    rank_arr = _make_rank_array(perm)
    for scale in range(ensemble.scale_lo, ensemble.scale_hi + 1):
        radius = 1 << scale
        # Superset of potentially affected ranks: those shifted by the move,
        # plus those whose window edge grazes the shifted region.
        cand_ranks: set[int] = set()
        cand_ranks.update(range(max(1, lo_m), min(N, hi_m) + 1))
        for edge in (-radius, radius):
            span_lo = lo_m - 2 - edge
            span_hi = hi_m + 2 - edge
            cand_ranks.update(range(max(1, span_lo), min(N, span_hi) + 1))
        for rv in sorted(cand_ranks):
            v = int(old_order[rv - 1])
            if v == u:
                continue
            rv_new = _new_rank_of_slot(rv, N, r, j)
            old_window = [(rv - radius, rv + radius)]
            new_window_old_slots = _window_in_old_ranks(rv_new, scale, r, j)
            outgoing = _intervals_subtract(old_window, new_window_old_slots)
            if not outgoing:
                continue
            incoming = _intervals_subtract(new_window_old_slots, old_window)
            out_slots = [p for lo, hi in sorted(outgoing) for p in range(lo, hi + 1)]
            in_slots = [p for lo, hi in incoming for p in range(lo, hi + 1)]
            in_slots.sort(key=lambda p: _new_rank_of_slot(p, N, r, j))
            if len(out_slots) != len(in_slots):  # padded windows are equal-size
                raise RuntimeError("window bookkeeping out of sync")
            mapping = {
                padded.encode(po, old_order): padded.encode(pi, old_order)
                for po, pi in zip(out_slots, in_slots)
            }
            cell = out.cells[(v, scale)]
            hit = np.isin(cell, np.fromiter(mapping.keys(), dtype=np.int64,
                                            count=len(mapping)))
            changed = int(hit.sum())
            if changed == 0:
                continue
            new_cell = cell.copy()
            for code_out, code_in in mapping.items():
                new_cell[cell == code_out] = code_in
            out.cells[(v, scale)] = new_cell
            dist += 2 * changed
    return out, dist


@dataclass
class ImproveStats:
    moves: int = 0
    guard_tripped: bool = False
    refresh_dist_total: int = 0
    applied: list[tuple[int, int, float]] = field(default_factory=list)


def local_improve(
    perm: Permutation,
    oracle: PreferenceOracle,
    eps: float,
    n: int,
    config: DecomposeConfig,
    rng: np.random.Generator,
    audit_oracle: PreferenceOracle | None = None,
) -> tuple[Permutation, ImproveStats]:
    """Iterated sampled greedy improvement; returns the input unchanged for
    blocks below the size floor.  ``audit_oracle`` (tests only) records the
    exact gain of every applied move."""
    stats = ImproveStats()
    N = len(perm)
    if N <= config.improve_size_floor(n) or N < 2:
        return perm, stats
    ensemble = build_ensemble(perm, eps, n, config, rng)
    guard = config.iteration_guard(N, n)
    # Cursor over rank positions: the loop ends only after a full pass in
    # which no probed move clears the threshold, matching the while-loop
    # semantics without rescanning from rank 1 after every applied move.
    cursor = 1
    clean = 0
    rank_arr = _make_rank_array(perm)
    while clean < N:
        u = perm.at(cursor)
        found = _evaluate_element(ensemble, perm, rank_arr, u, oracle, eps, n,
                                  config, rng)
        if found is None:
            clean += 1
            cursor = cursor % N + 1
            continue
        _, j, estimate = found
        if audit_oracle is not None:
            exact = test_move_exact(perm, audit_oracle, u, j)
            stats.applied.append((u, j, float(exact)))
        ensemble, moved = refresh_ensemble(ensemble, perm, u, j, config, rng)
        stats.refresh_dist_total += moved
        perm = perm.move(u, j)
        rank_arr = _make_rank_array(perm)
        stats.moves += 1
        clean = 0
        if stats.moves >= guard:
            stats.guard_tripped = True
            break
    return perm, stats


@dataclass
class DecomposeResult:
    decomposition: OrderedDecomposition
    permutation: Permutation  # respects the decomposition
    flags: list[str]          # "small" | "chaos" per block
    guard_tripped: bool
    total_moves: int


def sample_and_rank(
    perm: Permutation,
    oracle: CountedOracle,
    eps: float,
    n: int,
    config: DecomposeConfig,
    rng: np.random.Generator,
    audit_oracle: PreferenceOracle | None = None,
) -> DecomposeResult:
    """Recursive divide step over a block carrying its current permutation."""
    blocks: list[tuple[tuple[int, ...], str]] = []
    guard_tripped = False
    total_moves = 0

    def recurse(p: Permutation) -> None:
        nonlocal guard_tripped, total_moves
        N = len(p)
        if n >= 3 and N <= small_block_threshold(n):
            blocks.append((p.order, "small"))
            return
        oracle.set_phase("estimate")
        estimate = estimate_block_cost(p, oracle, eps, n, config, rng)
        if estimate >= config.c_chaos * eps * eps * N * N:
            blocks.append((p.order, "chaos"))
            return
        oracle.set_phase("ensemble")
        p1, st = local_improve(p, oracle, eps, n, config, rng, audit_oracle)
        guard_tripped |= st.guard_tripped
        total_moves += st.moves
        k = int(rng.integers(max(1, math.ceil(N / 3)), max(2, math.floor(2 * N / 3) + 1)))
        k = min(k, N - 1)
        recurse(Permutation(p1.order[:k]))
        recurse(Permutation(p1.order[k:]))

    recurse(perm)
    decomposition = OrderedDecomposition([b for b, _ in blocks])
    final = Permutation([v for b, _ in blocks for v in b])
    return DecomposeResult(decomposition, final, [f for _, f in blocks],
                           guard_tripped, total_moves)


def sample_and_rank_root(
    elements,
    oracle: PreferenceOracle,
    eps: float,
    config: DecomposeConfig | None = None,
    rng: np.random.Generator | None = None,
    ledger: QueryLedger | None = None,
    audit_oracle: PreferenceOracle | None = None,
) -> DecomposeResult:
    """QuickSort seed followed by the recursive decomposition."""
    if rng is None:
        rng = np.random.default_rng(0)
    if ledger is None:
        ledger = QueryLedger()
    config = config or DecomposeConfig(eps=eps)
    elements = list(elements)
    counted = CountedOracle(oracle, ledger, "qsort")
    seed_perm = quicksort_rank(elements, oracle, rng, ledger, phase="qsort")
    if len(elements) < 2:
        d = OrderedDecomposition([elements]) if elements else OrderedDecomposition([])
        return DecomposeResult(d, seed_perm, ["small"] * len(d.blocks), False, 0)
    return sample_and_rank(seed_perm, counted, eps, len(elements), config, rng,
                           audit_oracle)
