import itertools

import numpy as np
import pytest

from pairrank.core import OrderedDecomposition, Permutation, make_rng
from pairrank.metrics import (
    DecompositionSample,
    EdgeSample,
    c_tilde,
    decomp_partial_cost,
    footrule,
    kendall_tau,
    mfast_cost,
    partial_cost,
)
from pairrank.metrics import test_move_exact as exact_move_gain
from pairrank.metrics import test_move_sampled as sampled_move_gain
from pairrank.oracles import Tournament, make_planted

THREE_CYCLE = Tournament(np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=np.int8))


def test_mfast_cost_transitive_and_reversed():
    t = Tournament.from_order([0, 1, 2, 3])
    assert mfast_cost(Permutation([0, 1, 2, 3]), t) == 0
    assert mfast_cost(Permutation([3, 2, 1, 0]), t) == 6


def test_mfast_cost_three_cycle_all_orders():
    # rotations of the cycle pay one backward pair, reversals pay two;
    # the optimum is 1
    costs = sorted(mfast_cost(Permutation(o), THREE_CYCLE)
                   for o in itertools.permutations(range(3)))
    assert costs == [1, 1, 1, 2, 2, 2]


def test_partial_cost_full_sample_equals_exact():
    t, _ = make_planted(7, 0.3, 4)
    pi = Permutation([3, 0, 6, 1, 5, 2, 4])
    full = EdgeSample.full(range(7))
    assert partial_cost(pi, full, t) == mfast_cost(pi, t)


def test_partial_cost_consistent_is_zero():
    t, sigma = make_planted(8, 0.0, 1)
    sample = EdgeSample.uniform(range(8), 30, make_rng(2))
    assert partial_cost(sigma, sample, t) == 0.0


def test_partial_cost_empty_sample():
    with pytest.raises(ValueError):
        partial_cost(Permutation(range(4)), EdgeSample((), frozenset(range(4))),
                     Tournament.from_order(range(4)))


def test_edge_sample_uniform_marginals():
    # every unordered pair hit with near-equal frequency
    rng = make_rng(9)
    sample = EdgeSample.uniform(range(6), 30_000, rng)
    counts = {}
    for pair in sample.pairs:
        counts[pair] = counts.get(pair, 0) + 1
    assert len(counts) == 15
    freqs = np.array(list(counts.values())) / len(sample)
    assert np.all(np.abs(freqs - 1 / 15) < 0.01)


def test_partial_cost_unbiased():
    t, _ = make_planted(6, 0.4, 11)
    pi = Permutation([4, 1, 0, 5, 3, 2])
    exact = mfast_cost(pi, t)
    rng = make_rng(3)
    draws = np.array([
        partial_cost(pi, EdgeSample.uniform(range(6), 5, rng), t)
        for _ in range(100_000)
    ])
    se = draws.std() / np.sqrt(len(draws))
    assert abs(draws.mean() - exact) <= 3 * se


def test_decomp_partial_cost_unbiased():
    t, _ = make_planted(8, 0.35, 5)
    d = OrderedDecomposition([[0, 1, 2, 3], [4, 5, 6, 7]])
    pi = Permutation([2, 0, 3, 1, 7, 4, 6, 5])
    exact = sum(
        mfast_cost(pi.restricted_to(b), t) for b in d.blocks
    )
    rng = make_rng(6)
    draws = np.array([
        decomp_partial_cost(pi, d, DecompositionSample.uniform(d, 8, 6, rng), t)
        for _ in range(30_000)
    ])
    se = draws.std() / np.sqrt(len(draws))
    assert abs(draws.mean() - exact) <= 3 * se


def test_decomp_partial_cost_zero_convention():
    d = OrderedDecomposition([[0, 1, 2, 3], [4]])
    empty = DecompositionSample({}, frozenset([0]))
    t, _ = make_planted(5, 0.2, 0)
    assert decomp_partial_cost(Permutation(range(5)), d, empty, t) == 0.0


def test_c_tilde_trivial_small_block():
    # one small block covering V, no sampling: exact cost
    t, _ = make_planted(5, 0.3, 2)
    d = OrderedDecomposition([list(range(5))])
    pi = Permutation([4, 2, 0, 1, 3])
    sample = DecompositionSample({}, frozenset())
    # n large enough that a 5-element block counts as small (threshold ~5.3)
    val = c_tilde(pi, d, sample, t, n=1_000_000)
    assert val == mfast_cost(pi, t)


def test_c_tilde_requires_respecting():
    t, _ = make_planted(4, 0.2, 3)
    d = OrderedDecomposition([[0, 1], [2, 3]])
    sample = DecompositionSample({}, frozenset())
    with pytest.raises(ValueError):
        c_tilde(Permutation([2, 0, 1, 3]), d, sample, t, n=4)


def test_c_tilde_with_cross_term_matches_cost():
    # full per-block samples + cross term = exact total cost
    t, _ = make_planted(8, 0.3, 9)
    d = OrderedDecomposition([[0, 1, 2, 3], [4, 5, 6, 7]])
    pi = Permutation([1, 3, 0, 2, 6, 4, 7, 5])
    per_block = {i: EdgeSample.full(b) for i, b in enumerate(d.blocks)}
    sample = DecompositionSample(per_block, frozenset([0, 1]))
    val = c_tilde(pi, d, sample, t, n=8, include_cross_term=True)
    assert val == pytest.approx(mfast_cost(pi, t))


def test_kendall_and_footrule():
    a, b = Permutation([1, 2, 3]), Permutation([3, 2, 1])
    assert kendall_tau(a, b) == 3
    assert footrule(a, b) == 4
    assert kendall_tau(a, a) == footrule(a, a) == 0
    with pytest.raises(ValueError):
        kendall_tau(a, Permutation([1, 2, 4]))


def test_footrule_always_even():
    rng = make_rng(1)
    for _ in range(50):
        a = Permutation(rng.permutation(9))
        b = Permutation(rng.permutation(9))
        assert footrule(a, b) % 2 == 0
        assert kendall_tau(a, b) == kendall_tau(b, a)


def test_diaconis_graham_inequality():
    rng = make_rng(2)
    for _ in range(200):
        a = Permutation(rng.permutation(10))
        b = Permutation(rng.permutation(10))
        kt, fr = kendall_tau(a, b), footrule(a, b)
        assert kt <= fr <= 2 * kt


def test_kendall_triangle_with_costs():
    # d_tau(pi, sigma) <= C(pi) + C(sigma) on exhaustive small cases
    rng = make_rng(7)
    for seed in range(10):
        t, _ = make_planted(5, 0.45, seed)
        perms = [Permutation(p) for p in itertools.permutations(range(5))]
        pi, sigma = perms[rng.integers(len(perms))], perms[rng.integers(len(perms))]
        assert kendall_tau(pi, sigma) <= mfast_cost(pi, t) + mfast_cost(sigma, t)


def test_test_move_exact_identity():
    rng = make_rng(4)
    for seed in range(12):
        t, _ = make_planted(7, 0.4, seed)
        pi = Permutation(rng.permutation(7))
        for v in range(7):
            for i in range(1, 8):
                lhs = exact_move_gain(pi, t, v, i)
                rhs = mfast_cost(pi, t) - mfast_cost(pi.move(v, i), t)
                assert lhs == rhs


def test_test_move_exact_displacement():
    # consistent order with one element moved to the end, then moved back
    t = Tournament.from_order(range(6))
    pi = Permutation([1, 2, 3, 4, 5, 0])  # 0 misplaced at the end
    assert exact_move_gain(pi, t, 0, 1) == 5


def test_test_move_sampled_full_sample_equals_exact():
    t, _ = make_planted(8, 0.3, 8)
    pi = Permutation([5, 2, 7, 0, 3, 6, 1, 4])
    v, i = 7, 8
    interval = [pi.at(p) for p in range(pi.rank_of(v) + 1, i + 1)]
    sample = EdgeSample.of([(v, x) for x in interval], range(8))
    assert sampled_move_gain(pi, t, v, i, sample) == exact_move_gain(pi, t, v, i)


def test_test_move_sampled_single_neighbor():
    t = Tournament.from_order(range(4))
    pi = Permutation([1, 0, 2, 3])
    sample = EdgeSample.of([(0, 1)], range(4))
    assert sampled_move_gain(pi, t, 0, 1, sample) == 1.0  # swap fixes the pair


def test_test_move_sampled_unbiased():
    t, _ = make_planted(9, 0.4, 3)
    pi = Permutation([8, 3, 1, 6, 0, 4, 7, 2, 5])
    v, i = 8, 7
    exact = exact_move_gain(pi, t, v, i)
    rng = make_rng(5)
    universe = list(range(9))
    draws = []
    interval = [pi.at(p) for p in range(pi.rank_of(v) + 1, i + 1)]
    for _ in range(100_000):
        x = interval[rng.integers(len(interval))]
        sample = EdgeSample.of([(v, x)], universe)
        draws.append(sampled_move_gain(pi, t, v, i, sample))
    draws = np.array(draws)
    se = draws.std() / np.sqrt(len(draws))
    assert abs(draws.mean() - exact) <= 3 * se


def test_test_move_sampled_requires_interval_hit():
    t = Tournament.from_order(range(5))
    pi = Permutation(range(5))
    sample = EdgeSample.of([(0, 4)], range(5))  # rank 5, outside [2, 3]
    with pytest.raises(ValueError):
        sampled_move_gain(pi, t, 0, 3, sample)
