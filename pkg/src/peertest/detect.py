"""Permutation test for successful strategic manipulation.

For every reviewer ``i`` and work ``j`` the *impact* of ``i``'s ranking on
``j`` is the final position of ``j`` (with ``i``'s actual ranking placed among
the reference rankings) minus its expected position had ``i`` ranked uniformly
at random.  The statistic sums impacts over authored pairs; the null
distribution re-sums them over authorship matrices obtained by permuting rows
and columns of ``(C, A)`` that stay compatible with the assignment.

Impacts are kept as integers scaled by ``2R`` (``R`` rankings averaged over,
and tied positions are half-integers), so the statistic, every null value and
the strict-inequality decision are exact and reproducible bit for bit.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations, product
from typing import Union

import numpy as np

from . import errors
from .aggregate import (ENUMERATION_CAP, MC_SAMPLES, AggregationRule, block_positions, contributions,
                        order_to_index_ranking, ranking_contributions, total_scores, uniform_position_sums,
                        uniform_rankings)
from .core import Assignment, ProblemInstance, ReviewProfile, validate_profile

NONE = "none"
GROUND_TRUTH = "ground-truth"
NULL_ENUMERATION_CAP = 100_000
NULL_ATTEMPTS_PER_SAMPLE = 1000

Supervision = Union[None, str, ReviewProfile]


@dataclass(frozen=True)
class TestConfig:
    alpha: float = 0.05
    k: int = 100  # 0 = enumerate every permutation pair
    supervision: Supervision = None
    seed: int | None = None
    ranking_cap: int = ENUMERATION_CAP
    ranking_samples: int = MC_SAMPLES

    __test__ = False

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise errors.InvalidTestConfig(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.k < 0:
            raise errors.InvalidTestConfig("k must be non-negative")
        if self.k > 0 and threshold_index(self.alpha, self.k) < 2:
            raise errors.InvalidTestConfig(
                f"floor(alpha * k) must be at least 1 (alpha={self.alpha}, k={self.k})")
        if isinstance(self.supervision, str) and self.supervision not in (NONE, GROUND_TRUTH):
            raise errors.InvalidTestConfig(f"unknown supervision {self.supervision!r}")


@dataclass(frozen=True, eq=False)
class TestResult:
    tau: float
    phi: np.ndarray
    reject: bool
    threshold_index: int
    threshold_value: float
    effect_size: float | None
    authored_count: int
    p_value: float
    alpha: float

    __test__ = False


@dataclass(frozen=True, eq=False)
class ImpactMatrix:
    """``impact[i, j] = numerators[i, j] / denominator``."""

    numerators: np.ndarray
    denominator: int

    def statistic_numerator(self, authorship: np.ndarray) -> int:
        return int(self.numerators[np.asarray(authorship, dtype=bool)].sum())

    def statistic(self, authorship: np.ndarray) -> float:
        return self.statistic_numerator(authorship) / self.denominator


@dataclass(frozen=True, eq=False)
class NullPermutations:
    """Accepted permutation pairs: entry ``(r, c)`` of ``A`` moves to ``(rows[b, r], cols[b, c])``."""

    rows: np.ndarray
    cols: np.ndarray

    def __len__(self) -> int:
        return self.rows.shape[0]

    def matrices(self, matrix: np.ndarray) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=bool)
        k = len(self)
        out = np.zeros((k,) + matrix.shape, dtype=bool)
        out[np.arange(k)[:, None, None], self.rows[:, :, None], self.cols[:, None, :]] = matrix[None]
        return out


def threshold_index(alpha: float, size: int) -> int:
    """``floor(alpha * size) + 1`` evaluated on the decimal value of ``alpha``."""
    return math.floor(Fraction(repr(float(alpha))) * size) + 1


def ground_truth_profile(inst: ProblemInstance, assignment: Assignment) -> ReviewProfile:
    q = inst.qualities
    return ReviewProfile(tuple(tuple(sorted(works, key=lambda j: (-q[j], j))) for works in assignment.per_reviewer))


def _resolve_supervision(inst: ProblemInstance | None, assignment: Assignment,
                         supervision: Supervision) -> ReviewProfile | None:
    if supervision is None or supervision == NONE:
        return None
    if supervision == GROUND_TRUTH:
        if inst is None:
            raise errors.InvalidTestConfig("ground-truth supervision needs the instance qualities")
        return ground_truth_profile(inst, assignment)
    try:
        validate_profile(assignment, supervision)
    except errors.ValidationError as exc:
        raise errors.SupervisionAssignmentMismatch(f"impartial profile does not fit the assignment: {exc}",
                                                   **exc.details) from exc
    return supervision


def _ranking_seed(assignment: Assignment, reference: ReviewProfile, reviewer: int) -> np.random.SeedSequence:
    h = hashlib.sha256(np.packbits(assignment.matrix).tobytes())
    for order in reference.orders:
        h.update(np.asarray(order, dtype=np.int64).tobytes())
    return np.random.SeedSequence(int(h.hexdigest()[:32], 16), spawn_key=(reviewer,))


def impact_matrix(profile: ReviewProfile, assignment: Assignment, rule: AggregationRule,
                  supervision: ReviewProfile | None = None, *, cap: int = ENUMERATION_CAP,
                  samples: int = MC_SAMPLES) -> ImpactMatrix:
    """Scaled impacts of each reviewer's ranking on every work.

    When ``mu!`` exceeds ``cap`` the expectation is a pseudo-random average over
    ``samples`` rankings whose seed depends only on the assignment, the
    reference profile and the reviewer, never on authorship.
    """
    reference = supervision if supervision is not None else profile
    m, n = assignment.m, assignment.n
    ref_scores = total_scores(reference, rule, n)
    mus = {len(w) for w in assignment.per_reviewer if w}
    exact = all(math.factorial(mu) <= cap for mu in mus)
    denominator = math.factorial(max(mus, default=0)) if exact else samples
    if exact and len(mus) > 1:
        denominator = math.lcm(*(math.factorial(mu) for mu in mus))

    nums = np.zeros((m, n), dtype=np.int64)
    for i, works in enumerate(assignment.per_reviewer):
        if not works:
            continue
        works = np.asarray(works, dtype=np.int64)
        base = ref_scores - contributions(reference.orders[i], rule, n)
        seed = None if exact else _ranking_seed(assignment, reference, i)
        rankings = uniform_rankings(works.size, cap, samples, seed)
        own = order_to_index_ranking(profile.orders[i], works)
        actual = block_positions(base, works, ranking_contributions(works, own, rule))[0]
        sums = uniform_position_sums(base, works, rule, rankings)
        scale = denominator // rankings.shape[0]
        nums[i] = scale * (rankings.shape[0] * actual - sums)
    # block positions are doubled
    return ImpactMatrix(nums, 2 * denominator)


def compute_statistic(profile: ReviewProfile, authorship: np.ndarray, assignment: Assignment,
                      rule: AggregationRule, supervision: ReviewProfile | None = None, **kw) -> float:
    if supervision is not None:
        supervision = _resolve_supervision(None, assignment, supervision)
    return impact_matrix(profile, assignment, rule, supervision, **kw).statistic(authorship)


def _accepts(assignment: np.ndarray, conflict_rows: np.ndarray, conflict_cols: np.ndarray,
             rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    if conflict_rows.size == 0:
        return np.ones(rows.shape[0], dtype=bool)
    return ~assignment[rows[:, conflict_rows], cols[:, conflict_cols]].any(axis=1)


def enumerate_null_permutations(conflicts: np.ndarray, assignment: Assignment,
                                cap: int = NULL_ENUMERATION_CAP) -> NullPermutations:
    """Every permutation pair whose permuted conflicts avoid the assignment."""
    m, n = assignment.m, assignment.n
    if math.factorial(m) * math.factorial(n) > cap:
        raise errors.EnumerationTooLarge(f"{m}!*{n}! permutation pairs exceed the cap {cap}")
    pm = np.array(list(permutations(range(m))), dtype=np.int64).reshape(-1, m)
    pn = np.array(list(permutations(range(n))), dtype=np.int64).reshape(-1, n)
    a, b = (x.ravel() for x in np.meshgrid(np.arange(len(pm)), np.arange(len(pn)), indexing="ij"))
    rows, cols = pm[a], pn[b]
    cr, cc = np.nonzero(conflicts)
    ok = _accepts(assignment.matrix, cr, cc, rows, cols)
    return NullPermutations(rows[ok], cols[ok])


def sample_null_permutations(conflicts: np.ndarray, assignment: Assignment, k: int, seed=None,
                             *, attempts_per_sample: int = NULL_ATTEMPTS_PER_SAMPLE) -> NullPermutations:
    """``k`` independent uniform draws from the accepted permutation pairs (duplicates kept)."""
    rng = np.random.default_rng(seed)
    m, n = assignment.m, assignment.n
    cr, cc = np.nonzero(conflicts)
    budget = attempts_per_sample * k
    used = 0
    rate = 0.05
    got_rows: list[np.ndarray] = []
    got_cols: list[np.ndarray] = []
    got = 0
    while got < k:
        if used >= budget:
            raise errors.RejectionBudgetExhausted(
                f"only {got} of {k} null authorship matrices accepted after {used} draws", attempts=used)
        want = math.ceil(1.25 * (k - got) / rate) + 16
        batch = int(min(budget - used, want, max(16, 4_000_000 // (m + n))))
        rows = rng.permuted(np.broadcast_to(np.arange(m), (batch, m)), axis=1)
        cols = rng.permuted(np.broadcast_to(np.arange(n), (batch, n)), axis=1)
        ok = np.flatnonzero(_accepts(assignment.matrix, cr, cc, rows, cols))[: k - got]
        used += batch
        got += ok.size
        got_rows.append(rows[ok])
        got_cols.append(cols[ok])
        rate = max(got / used, 1e-3)
    return NullPermutations(np.concatenate(got_rows), np.concatenate(got_cols))


def sample_null_matrices(conflicts: np.ndarray, authorship: np.ndarray, assignment: Assignment, k: int,
                         seed=None) -> np.ndarray:
    """Null authorship matrices as a ``(k, m, n)`` boolean array; ``k = 0`` enumerates all of them."""
    perms = (enumerate_null_permutations(conflicts, assignment) if k == 0
             else sample_null_permutations(conflicts, assignment, k, seed))
    return perms.matrices(authorship)


def null_numerators(impacts: ImpactMatrix, authorship: np.ndarray, perms: NullPermutations) -> np.ndarray:
    ar, ac = np.nonzero(authorship)
    if ar.size == 0:
        return np.zeros(len(perms), dtype=np.int64)
    return impacts.numerators[perms.rows[:, ar], perms.cols[:, ac]].sum(axis=1)


def null_distribution(profile: ReviewProfile, nulls: np.ndarray, assignment: Assignment, rule: AggregationRule,
                      supervision: ReviewProfile | None = None, **kw) -> np.ndarray:
    nulls = np.asarray(nulls, dtype=bool)
    if nulls.ndim == 2:
        nulls = nulls[None]
    if supervision is not None:
        supervision = _resolve_supervision(None, assignment, supervision)
    impacts = impact_matrix(profile, assignment, rule, supervision, **kw)
    nums = (nulls * impacts.numerators[None]).sum(axis=(1, 2))
    return nums / impacts.denominator


def decide(tau: float, phi, alpha: float, authored_count: int | None = None) -> TestResult:
    phi = np.asarray(phi)
    if phi.size == 0:
        raise errors.EmptyNullDistribution("null distribution is empty")
    idx = threshold_index(alpha, phi.size)
    ordered = np.sort(phi, kind="stable")
    threshold = ordered[idx - 1]
    effect = None
    if authored_count:
        effect = float(tau) / authored_count
    p_value = (1 + int((phi <= tau).sum())) / (1 + phi.size)
    return TestResult(
        tau=float(tau), phi=phi, reject=bool(tau < threshold), threshold_index=idx,
        threshold_value=float(threshold), effect_size=effect,
        authored_count=int(authored_count or 0), p_value=p_value, alpha=float(alpha),
    )


def run_test(inst: ProblemInstance, assignment: Assignment, profile: ReviewProfile, config: TestConfig,
             rule: AggregationRule | None = None) -> TestResult:
    validate_profile(assignment, profile)
    rule = rule or AggregationRule.borda(inst.mu)
    reference = _resolve_supervision(inst, assignment, config.supervision)
    impacts = impact_matrix(profile, assignment, rule, reference,
                            cap=config.ranking_cap, samples=config.ranking_samples)
    if config.k == 0:
        perms = enumerate_null_permutations(inst.conflicts, assignment)
    else:
        perms = sample_null_permutations(inst.conflicts, assignment, config.k, config.seed)
    tau_num = impacts.statistic_numerator(inst.authorship)
    phi_num = null_numerators(impacts, inst.authorship, perms)
    d = impacts.denominator
    return decide(tau_num / d, phi_num / d, config.alpha, int(inst.authorship.sum()))


def result_summary(result: TestResult) -> dict:
    phi = result.phi
    q = np.quantile(phi, [0.05, 0.25, 0.5, 0.75, 0.95]).tolist() if phi.size else []
    return {
        "tau": result.tau,
        "reject": result.reject,
        "alpha": result.alpha,
        "effect_size": result.effect_size,
        "authored_count": result.authored_count,
        "threshold_index": result.threshold_index,
        "threshold_value": result.threshold_value,
        "p_value": result.p_value,
        "phi": {
            "size": int(phi.size),
            "min": float(phi.min()),
            "q05": q[0], "q25": q[1], "median": q[2], "q75": q[3], "q95": q[4],
            "max": float(phi.max()),
            "mean": float(phi.mean()),
        },
    }
