from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from peertest import errors
from peertest.aggregate import (AggregationRule, aggregate, block_positions, doubled_positions,
                                expected_positions_under_uniform, ranking_contributions, tied_positions,
                                uniform_rankings)
from peertest.assign import sample_assignment
from peertest.core import Assignment, ProblemInstance, ReviewProfile


def random_profile(assignment, rng):
    return ReviewProfile(tuple(tuple(int(w) for w in rng.permutation(works)) for works in assignment.per_reviewer))


def test_single_reviewer():
    out = aggregate(ReviewProfile(((0, 1, 2),)), AggregationRule.borda(3), 3)
    assert out.scores.tolist() == [1, 2, 3]
    assert out.positions.tolist() == [1, 2, 3]


def test_opposite_rankings_tie():
    out = aggregate(ReviewProfile(((0, 1), (1, 0))), AggregationRule.borda(2), 2)
    assert out.scores.tolist() == [3, 3]
    assert out.positions.tolist() == [1.5, 1.5]


def test_tied_positions_average_places():
    assert tied_positions([3, 3, 1, 5, 5, 5]).tolist() == [2.5, 2.5, 1, 5, 5, 5]
    assert doubled_positions([7, 7, 7]).tolist() == [4, 4, 4]


def test_toy_instance_matches_oracle():
    inst = ProblemInstance.identity(5, 3)
    m = sample_assignment(inst, 4)
    p = random_profile(m, np.random.default_rng(1))
    got = aggregate(p, AggregationRule.borda(3), 5)
    assert got.scores.tolist() == oracles.borda_scores(p.orders, 5)
    assert [Fraction(x) for x in got.positions] == oracles.positions(p.orders, 5)


def test_weights_must_increase():
    with pytest.raises(errors.ConfigError):
        AggregationRule((1, 1, 2))


def test_expected_position_lone_reviewer_is_middle():
    m = Assignment.from_lists([[0, 1, 2]], 3)
    exp = expected_positions_under_uniform(0, ReviewProfile(((0, 1, 2),)), AggregationRule.borda(3), m)
    assert exp.tolist() == [2, 2, 2]


def test_expected_positions_small_enumeration():
    m = Assignment.from_lists([[1, 2], [0, 2], [0, 1]], 3)
    p = ReviewProfile(((2, 1), (0, 2), (1, 0)))
    for i in range(3):
        got = expected_positions_under_uniform(i, p, AggregationRule.borda(2), m)
        want = oracles.expected_positions(p.orders, i, m.per_reviewer[i], 3)
        assert [Fraction(x) for x in got] == want


@settings(max_examples=40, deadline=None)
@given(n=st.integers(3, 7), lam=st.integers(1, 2), seed=st.integers(0, 2**32 - 1))
def test_expected_positions_agree_with_oracle(n, lam, seed):
    inst = ProblemInstance.identity(n, lam)
    m = sample_assignment(inst, seed)
    p = random_profile(m, np.random.default_rng(seed))
    i = seed % n
    got = expected_positions_under_uniform(i, p, AggregationRule.borda(lam), m)
    want = oracles.expected_positions(p.orders, i, m.per_reviewer[i], n)
    assert [Fraction(x).limit_denominator(10**6) for x in got] == want


@settings(max_examples=40, deadline=None)
@given(n=st.integers(3, 9), lam=st.integers(1, 3), seed=st.integers(0, 2**32 - 1))
def test_block_positions_against_full_recount(n, lam, seed):
    if lam >= n:
        return
    inst = ProblemInstance.identity(n, lam)
    m = sample_assignment(inst, seed)
    p = random_profile(m, np.random.default_rng(seed))
    rule = AggregationRule.borda(lam)
    i = seed % n
    works = np.array(m.per_reviewer[i])
    base = aggregate(p, rule, n).scores.copy()
    base[list(p.orders[i])] -= np.arange(1, lam + 1)
    rankings = uniform_rankings(lam)
    got = block_positions(base, works, ranking_contributions(works, rankings, rule))
    for r, ranking in enumerate(rankings):
        orders = list(p.orders)
        orders[i] = tuple(int(works[t]) for t in ranking)
        assert [Fraction(int(x), 2) for x in got[r]] == oracles.positions(orders, n)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_relabeling_works_permutes_positions(seed):
    rng = np.random.default_rng(seed)
    n = 8
    m = sample_assignment(ProblemInstance.identity(n, 3), seed)
    p = random_profile(m, rng)
    perm = rng.permutation(n)
    relabeled = ReviewProfile(tuple(tuple(int(perm[w]) for w in o) for o in p.orders))
    rule = AggregationRule.borda(3)
    a, b = aggregate(p, rule, n), aggregate(relabeled, rule, n)
    assert np.array_equal(b.scores[perm], a.scores)
    assert np.array_equal(b.positions[perm], a.positions)


def test_distinct_scores_rank_ascending():
    scores = np.array([9, 4, 7, 1, 12])
    assert tied_positions(scores).tolist() == (np.argsort(np.argsort(scores)) + 1).tolist()


def test_monte_carlo_expectation_close_to_enumeration():
    inst = ProblemInstance.identity(12, 4)
    m = sample_assignment(inst, 8)
    p = random_profile(m, np.random.default_rng(8))
    rule = AggregationRule.borda(4)
    exact = expected_positions_under_uniform(2, p, rule, m)
    mc = expected_positions_under_uniform(2, p, rule, m, cap=1, samples=20000, seed=3)
    # positions lie in [1, n], so the standard error is at most (n - 1) / 2 / sqrt(samples)
    assert np.all(np.abs(mc - exact) <= 3 * 5.5 / np.sqrt(20000))


def test_cap_without_seed_errors():
    with pytest.raises(errors.CapExceededWithoutSeed):
        uniform_rankings(8, cap=10)


def test_uniform_rankings_enumerates_all():
    r = uniform_rankings(4)
    assert r.shape == (24, 4)
    assert len({tuple(x) for x in r}) == 24
