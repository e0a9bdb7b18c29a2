"""Positional-scoring aggregation.

Each reviewer contributes ``weights[p]`` to the work it places at position
``p + 1``; smaller totals are better.  Tied works share a position: the
average of the places they jointly occupy, so two works tied for the top both
sit at 1.5.  Internally positions are carried doubled,
``2 * position = #{smaller} + #{smaller or equal} + 1``, which keeps every
sum exact in integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np

from . import errors
from .core import Assignment, ReviewProfile

ENUMERATION_CAP = 5040
MC_SAMPLES = 10_000


@dataclass(frozen=True)
class AggregationRule:
    weights: tuple[float, ...]
    name: str = "custom"

    def __post_init__(self):
        w = tuple(self.weights)
        if any(b <= a for a, b in zip(w, w[1:])):
            raise errors.ConfigError("positional weights must be strictly increasing")
        object.__setattr__(self, "weights", w)

    @classmethod
    def borda(cls, mu: int) -> "AggregationRule":
        return cls(tuple(range(1, mu + 1)), "borda")

    @property
    def mu(self) -> int:
        return len(self.weights)

    def as_array(self) -> np.ndarray:
        w = np.asarray(self.weights)
        if np.all(w == np.round(w)):
            return w.astype(np.int64)
        return w.astype(float)


@dataclass(frozen=True, eq=False)
class FinalOrdering:
    scores: np.ndarray
    positions: np.ndarray


def doubled_positions(scores: np.ndarray) -> np.ndarray:
    """Twice the shared-tie position of every entry (always an integer)."""
    scores = np.asarray(scores)
    ordered = np.sort(scores)
    less = np.searchsorted(ordered, scores, side="left")
    leq = np.searchsorted(ordered, scores, side="right")
    return (less + leq + 1).astype(np.int64)


def tied_positions(scores: np.ndarray) -> np.ndarray:
    return doubled_positions(scores) / 2


def contributions(order, rule: AggregationRule, n: int) -> np.ndarray:
    w = rule.as_array()
    out = np.zeros(n, dtype=w.dtype)
    out[np.asarray(order, dtype=np.int64)] = w[: len(order)]
    return out


def total_scores(profile: ReviewProfile, rule: AggregationRule, n: int) -> np.ndarray:
    w = rule.as_array()
    scores = np.zeros(n, dtype=w.dtype)
    for order in profile.orders:
        if order:
            np.add.at(scores, np.asarray(order, dtype=np.int64), w[: len(order)])
    return scores


def aggregate(profile: ReviewProfile, rule: AggregationRule, n: int) -> FinalOrdering:
    scores = total_scores(profile, rule, n)
    return FinalOrdering(scores=scores, positions=tied_positions(scores))


@lru_cache(maxsize=16)
def _all_rankings(mu: int) -> np.ndarray:
    arr = np.array(list(permutations(range(mu))), dtype=np.int64).reshape(-1, mu)
    arr.setflags(write=False)
    return arr


def uniform_rankings(mu: int, cap: int = ENUMERATION_CAP, samples: int = MC_SAMPLES, seed=None) -> np.ndarray:
    """Rankings over which the uniform expectation is taken, as index arrays ``(R, mu)``.

    All ``mu!`` orders when that fits under ``cap``; otherwise ``samples``
    pseudo-random orders drawn from ``seed``.
    """
    if math.factorial(mu) <= cap:
        return _all_rankings(mu)
    if seed is None:
        raise errors.CapExceededWithoutSeed(f"{mu}! rankings exceed the cap {cap} and no seed was supplied")
    rng = np.random.default_rng(seed)
    return rng.permuted(np.broadcast_to(np.arange(mu), (samples, mu)), axis=1)


def block_positions(base: np.ndarray, works: np.ndarray, added: np.ndarray) -> np.ndarray:
    """Doubled final positions of all works for each row of ``added``.

    ``base`` holds the totals without one reviewer; ``added[r, t]`` is that
    reviewer's contribution to ``works[t]`` in scenario ``r``.  Only the block
    moves, so everything else is counted against a single sorted array.
    """
    n = base.size
    works = np.asarray(works, dtype=np.int64)
    outside = np.ones(n, dtype=bool)
    outside[works] = False
    others = np.flatnonzero(outside)
    rest = np.sort(base[others])
    new = base[works][None, :] + added  # (R, mu)

    pos = np.empty((added.shape[0], n), dtype=np.int64)
    fixed = base[others]
    rest_count = np.searchsorted(rest, fixed, side="left") + np.searchsorted(rest, fixed, side="right")
    block_count = ((new[:, None, :] < fixed[None, :, None]).sum(axis=2)
                   + (new[:, None, :] <= fixed[None, :, None]).sum(axis=2))
    pos[:, others] = 1 + rest_count[None, :] + block_count
    flat = new.ravel()
    in_rest = (np.searchsorted(rest, flat, side="left") + np.searchsorted(rest, flat, side="right")).reshape(new.shape)
    in_block = (new[:, None, :] < new[:, :, None]).sum(axis=2) + (new[:, None, :] <= new[:, :, None]).sum(axis=2)
    pos[:, works] = 1 + in_rest + in_block
    return pos


def ranking_contributions(works: np.ndarray, rankings: np.ndarray, rule: AggregationRule) -> np.ndarray:
    """``added[r, t]`` for each index-ranking row, aligned with ``works``."""
    w = rule.as_array()[: rankings.shape[1]]
    added = np.empty(rankings.shape, dtype=w.dtype)
    added[np.arange(rankings.shape[0])[:, None], rankings] = w[None, :]
    return added


def order_to_index_ranking(order, works) -> np.ndarray:
    lookup = {int(j): t for t, j in enumerate(works)}
    return np.array([[lookup[int(j)] for j in order]], dtype=np.int64)


def uniform_position_sums(base: np.ndarray, works, rule: AggregationRule, rankings: np.ndarray) -> np.ndarray:
    """Integer sum over ``rankings`` of every work's doubled final position."""
    works = np.asarray(works, dtype=np.int64)
    total = np.zeros(base.size, dtype=np.int64)
    # chunk keeps the (R, n, mu) comparison tensor bounded
    step = max(1, 2_000_000 // max(1, base.size * max(1, works.size)))
    for start in range(0, rankings.shape[0], step):
        chunk = rankings[start:start + step]
        total += block_positions(base, works, ranking_contributions(works, chunk, rule)).sum(axis=0)
    return total


def expected_positions_under_uniform(
    reviewer: int,
    profile: ReviewProfile,
    rule: AggregationRule,
    assignment: Assignment,
    *,
    cap: int = ENUMERATION_CAP,
    samples: int = MC_SAMPLES,
    seed=None,
) -> np.ndarray:
    """Expected final position of every work when ``reviewer``'s ranking is uniform.

    The reviewer's own entry in ``profile`` is ignored; all other rankings stay
    fixed.  Works outside ``M(reviewer)`` are included since they can shift.
    """
    n = assignment.n
    works = np.asarray(assignment.per_reviewer[reviewer], dtype=np.int64)
    base = total_scores(profile, rule, n) - contributions(profile.orders[reviewer], rule, n)
    rankings = uniform_rankings(len(works), cap, samples, seed)
    return uniform_position_sums(base, works, rule, rankings) / (2 * rankings.shape[0])
