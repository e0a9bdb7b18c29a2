import itertools
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from peertest import errors
from peertest.aggregate import AggregationRule
from peertest.assign import enumerate_assignments, sample_assignment
from peertest.core import Assignment, ProblemInstance, ReviewProfile
from peertest.detect import (GROUND_TRUTH, NullPermutations, TestConfig, decide, enumerate_null_permutations,
                             ground_truth_profile, impact_matrix, null_numerators, run_test, sample_null_matrices,
                             sample_null_permutations, threshold_index)
from peertest.sim import simulate_profile
from peertest.strategy import NoiseModel, StrategyKind


def random_profile(assignment, rng):
    return ReviewProfile(tuple(tuple(int(w) for w in rng.permutation(works)) for works in assignment.per_reviewer))


def all_profiles(assignment):
    return [ReviewProfile(p) for p in itertools.product(*(itertools.permutations(w) for w in assignment.per_reviewer))]


def fractions(impacts):
    return [[Fraction(int(x), impacts.denominator) for x in row] for row in impacts.numerators]


# -- statistic --------------------------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(n=st.integers(3, 6), lam=st.integers(1, 3), seed=st.integers(0, 2**32 - 1), supervised=st.booleans())
def test_impacts_match_oracle(n, lam, seed, supervised):
    if lam >= n:
        return
    inst = ProblemInstance.identity(n, lam)
    m = sample_assignment(inst, seed)
    rng = np.random.default_rng(seed)
    p = random_profile(m, rng)
    ref = random_profile(m, rng) if supervised else None
    got = impact_matrix(p, m, AggregationRule.borda(lam), ref)
    want = oracles.impacts(p.orders, m.per_reviewer, n, None if ref is None else ref.orders)
    assert fractions(got) == want


def test_statistic_on_game20_matches_oracle():
    inst = ProblemInstance.identity(20, 4)
    m = sample_assignment(inst, 0)
    p = simulate_profile(inst, m, [StrategyKind.DISTANCE] * 20, NoiseModel(), 0)
    truth = ground_truth_profile(inst, m)
    got = run_test(inst, m, p, TestConfig(supervision=GROUND_TRUTH, seed=0))
    want = oracles.statistic(p.orders, inst.authorship.tolist(), m.per_reviewer, 20, truth.orders)
    assert Fraction(got.tau) == want


def test_scripted_distance_manipulation_is_rejected():
    inst = ProblemInstance.identity(20, 4)
    m = sample_assignment(inst, 0)
    p = simulate_profile(inst, m, [StrategyKind.DISTANCE] * 20, NoiseModel(), 0)
    truth = ground_truth_profile(inst, m)
    # brute force: some author strictly improves its own position by manipulating
    base = oracles.positions(truth.orders, 20)
    improved = []
    for i in range(20):
        orders = list(truth.orders)
        orders[i] = p.orders[i]
        improved.append(oracles.positions(orders, 20)[i] < base[i])
    assert any(improved)
    res = run_test(inst, m, p, TestConfig(supervision=GROUND_TRUTH, seed=0))
    assert res.reject and res.effect_size < 0
    assert res.tau == -4.75


def test_no_authored_works():
    inst = ProblemInstance(n=4, m=4, lam=2, mu=2, conflicts=np.eye(4, dtype=bool),
                           authorship=np.zeros((4, 4), bool), qualities=np.arange(1.0, 5.0))
    m = sample_assignment(inst, 1)
    res = run_test(inst, m, ground_truth_profile(inst, m), TestConfig(seed=1, k=20))
    assert res.tau == 0 and not res.reject and res.effect_size is None


# -- null distribution ------------------------------------------------------------------------

def test_anti_diagonal_enumeration():
    inst = ProblemInstance.identity(2, 1)
    m = Assignment.from_lists([[1], [0]], 2)
    nulls = sample_null_matrices(inst.conflicts, inst.authorship, m, 0)
    assert len(nulls) == 2
    for a in nulls:
        assert not (a & m.matrix).any()
    assert Counter(map(lambda a: a.tobytes(), nulls)) == Counter([np.eye(2, dtype=bool).tobytes()] * 2)


def test_enumeration_matches_oracle_multiset():
    inst = ProblemInstance.identity(3, 2)
    m = sample_assignment(inst, 2)
    p = random_profile(m, np.random.default_rng(2))
    res = run_test(inst, m, p, TestConfig(k=0, alpha=0.25))
    want = oracles.null_multiset(inst.conflicts.tolist(), inst.authorship.tolist(), m.per_reviewer, 3, p.orders)
    assert sorted(Fraction(x).limit_denominator(10**6) for x in res.phi) == sorted(want)
    tau = oracles.statistic(p.orders, inst.authorship.tolist(), m.per_reviewer, 3)
    assert res.reject == oracles.rejects(tau, want, 0.25)


def test_sampled_nulls_respect_assignment():
    inst = ProblemInstance.identity(20, 4)
    m = sample_assignment(inst, 5)
    nulls = sample_null_matrices(inst.conflicts, inst.authorship, m, 200, 9)
    assert nulls.shape == (200, 20, 20)
    assert not (nulls & m.matrix[None]).any()
    assert np.all(nulls.sum(axis=(1, 2)) == 20)


def test_null_permutation_sampler_is_uniform():
    inst = ProblemInstance.identity(3, 1)
    m = Assignment.from_lists([[1], [2], [0]], 3)
    allowed = enumerate_null_permutations(inst.conflicts, m)
    keys = {(tuple(r), tuple(c)) for r, c in zip(allowed.rows, allowed.cols)}
    perms = sample_null_permutations(inst.conflicts, m, 30_000, 4)
    counts = Counter((tuple(r), tuple(c)) for r, c in zip(perms.rows, perms.cols))
    assert set(counts) == keys
    from scipy import stats
    assert stats.chisquare(list(counts.values())).pvalue > 0.001


def test_rejection_budget():
    n = 8
    m = Assignment.from_lists([[i] for i in range(n)], n)
    conflicts = ~m.matrix
    inst = ProblemInstance(n=n, m=n, lam=1, mu=1, conflicts=conflicts, authorship=np.zeros((n, n), bool),
                           qualities=np.arange(float(n)))
    with pytest.raises(errors.RejectionBudgetExhausted):
        sample_null_permutations(inst.conflicts, m, 5, 0)


def test_enumeration_cap():
    inst = ProblemInstance.identity(9, 2)
    with pytest.raises(errors.EnumerationTooLarge):
        enumerate_null_permutations(inst.conflicts, sample_assignment(inst, 0))


# -- exact uniformity -------------------------------------------------------------------------

def instances_up_to_three():
    for n in (2, 3):
        for lam in range(1, n):
            yield ProblemInstance.identity(n, lam)


@st.composite
def small_instances(draw):
    n = draw(st.integers(2, 3))
    lam = draw(st.integers(1, n - 1))
    conflicts = np.array(draw(st.lists(st.booleans(), min_size=n * n, max_size=n * n))).reshape(n, n)
    authorship = conflicts & np.array(draw(st.lists(st.booleans(), min_size=n * n, max_size=n * n))).reshape(n, n)
    return ProblemInstance(n=n, m=n, lam=lam, mu=lam, conflicts=conflicts, authorship=authorship,
                           qualities=np.arange(1.0, n + 1))


def check_exact_uniformity(inst, supervision=None):
    alphas = (0.1, 0.25, 0.5)
    rule = AggregationRule.borda(inst.mu)
    for m in enumerate_assignments(inst):
        base = enumerate_null_permutations(inst.conflicts, m)
        for p in all_profiles(m):
            ref = None if supervision is None else ground_truth_profile(inst, m)
            imp = impact_matrix(p, m, rule, ref)
            phi = np.sort(null_numerators(imp, inst.authorship, base))
            taus = []
            for r, c in zip(base.rows, base.cols):
                one = NullPermutations(r[None], c[None])
                a = one.matrices(inst.authorship)[0]
                cm = one.matrices(inst.conflicts)[0]
                # the null multiset is the same whichever member of the orbit is the truth
                own = enumerate_null_permutations(cm, m)
                assert np.array_equal(np.sort(null_numerators(imp, a, own)), phi)
                taus.append(imp.statistic_numerator(a))
            assert np.array_equal(np.sort(taus), phi)
            for alpha in alphas:
                rejections = sum(decide(t, phi, alpha).reject for t in taus)
                assert rejections <= alpha * len(taus)


@pytest.mark.parametrize("inst", list(instances_up_to_three()), ids=lambda i: f"n{i.n}-lam{i.lam}")
@pytest.mark.parametrize("supervision", [None, GROUND_TRUTH])
def test_exact_uniformity_identity(inst, supervision):
    check_exact_uniformity(inst, supervision)


@settings(max_examples=40, deadline=None)
@given(small_instances())
def test_exact_uniformity_random_conflicts(inst):
    try:
        enumerate_assignments(inst)
    except errors.PeerTestError:
        return
    check_exact_uniformity(inst)


# -- decision rule ----------------------------------------------------------------------------

def test_threshold_index_uses_decimal_alpha():
    assert threshold_index(0.05, 100) == 6
    assert threshold_index(0.29, 100) == 30
    assert threshold_index(0.1, 30) == 4


def test_decide_strict_inequality():
    phi = np.arange(20.0)
    # |phi| = 20: the 2nd smallest value at alpha 0.05, the 3rd at alpha 0.1
    assert decide(1.0, phi, 0.05).reject is False
    assert decide(0.5, phi, 0.05).reject is True
    assert decide(2.0, phi, 0.1).reject is False
    assert decide(1.5, phi, 0.1).reject is True
    with pytest.raises(errors.EmptyNullDistribution):
        decide(0.0, [], 0.05)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=20, max_size=60), st.integers(-25, 25),
       st.floats(0.05, 0.5), st.floats(0.05, 0.5))
def test_alpha_monotone(phi, tau, a1, a2):
    lo, hi = sorted((a1, a2))
    if decide(tau, phi, lo).reject:
        assert decide(tau, phi, hi).reject


def test_config_validation():
    with pytest.raises(errors.InvalidTestConfig):
        TestConfig(alpha=0.01, k=50)
    with pytest.raises(errors.InvalidTestConfig):
        TestConfig(alpha=1.5)
    with pytest.raises(errors.InvalidTestConfig):
        TestConfig(supervision="oracle")
    TestConfig(alpha=0.01, k=0)


# -- invariances ------------------------------------------------------------------------------

def test_deterministic_given_seed():
    inst = ProblemInstance.identity(20, 4)
    m = sample_assignment(inst, 6)
    p = random_profile(m, np.random.default_rng(6))
    a = run_test(inst, m, p, TestConfig(seed=17))
    b = run_test(inst, m, p, TestConfig(seed=17))
    assert a.tau == b.tau and np.array_equal(a.phi, b.phi) and a.reject == b.reject


def test_relabeling_invariance():
    inst = ProblemInstance.identity(3, 2, qualities=[2.0, 9.0, 4.0])
    m = sample_assignment(inst, 8)
    p = random_profile(m, np.random.default_rng(8))
    rng = np.random.default_rng(1)
    rp, cp = rng.permutation(3), rng.permutation(3)

    def move(mat):
        out = np.zeros_like(mat)
        out[np.ix_(rp, cp)] = mat
        return out

    inst2 = ProblemInstance(n=3, m=3, lam=2, mu=2, conflicts=move(inst.conflicts), authorship=move(inst.authorship),
                            qualities=inst.qualities[np.argsort(cp)])
    m2 = Assignment(move(m.matrix))
    orders = [None] * 3
    for i, o in enumerate(p.orders):
        orders[rp[i]] = tuple(int(cp[w]) for w in o)
    p2 = ReviewProfile(tuple(orders))
    for sup in (None, GROUND_TRUTH):
        a = run_test(inst, m, p, TestConfig(k=0, alpha=0.25, supervision=sup))
        b = run_test(inst2, m2, p2, TestConfig(k=0, alpha=0.25, supervision=sup))
        assert a.tau == b.tau and a.reject == b.reject
        assert np.array_equal(np.sort(a.phi), np.sort(b.phi))


def test_supervised_impacts_ignore_other_actual_rankings():
    inst = ProblemInstance.identity(10, 3)
    m = sample_assignment(inst, 2)
    rng = np.random.default_rng(2)
    p = random_profile(m, rng)
    truth = ground_truth_profile(inst, m)
    rule = AggregationRule.borda(3)
    a = impact_matrix(p, m, rule, truth)
    p2 = p.replace(4, tuple(reversed(p.orders[4])))
    b = impact_matrix(p2, m, rule, truth)
    keep = np.arange(10) != 4
    assert np.array_equal(a.numerators[keep], b.numerators[keep])


def test_supervision_profile_must_fit_assignment():
    inst = ProblemInstance.identity(4, 2)
    m = sample_assignment(inst, 1)
    other = next(a for a in enumerate_assignments(inst) if a != m)
    with pytest.raises(errors.SupervisionAssignmentMismatch):
        run_test(inst, m, ground_truth_profile(inst, m), TestConfig(k=0, alpha=0.25,
                                                                   supervision=ground_truth_profile(inst, other)))


def test_large_mu_uses_seeded_monte_carlo():
    inst = ProblemInstance.identity(20, 4)
    m = sample_assignment(inst, 3)
    p = random_profile(m, np.random.default_rng(3))
    cfg = TestConfig(seed=1, k=40, ranking_cap=10, ranking_samples=500)
    a, b = run_test(inst, m, p, cfg), run_test(inst, m, p, cfg)
    assert a.tau == b.tau
    exact = run_test(inst, m, p, TestConfig(seed=1, k=40))
    assert abs(a.tau - exact.tau) < 1.0
    assert impact_matrix(p, m, AggregationRule.borda(4), cap=10, samples=500).denominator == 2 * 500
