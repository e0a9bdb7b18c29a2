"""Domain types shared across the package and their structural validation.

Reviewers and works are dense 0-based indices everywhere inside the package;
external ids only appear in :mod:`peertest.io`.  Higher quality is better and
position 1 is the best slot of any ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import errors


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Reviewers, works, loads, conflicts, authorship and true qualities.

    ``conflicts`` and ``authorship`` are ``(m, n)`` boolean matrices; ``qualities``
    holds one real value per work.
    """

    n: int
    m: int
    lam: int
    mu: int
    conflicts: np.ndarray
    authorship: np.ndarray
    qualities: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "conflicts", _frozen(self.conflicts, bool))
        object.__setattr__(self, "authorship", _frozen(self.authorship, bool))
        object.__setattr__(self, "qualities", _frozen(self.qualities, float))

    @classmethod
    def identity(cls, n: int, lam: int, qualities: Sequence[float] | None = None) -> "ProblemInstance":
        """``n = m``, ``lambda = mu`` and ``C = A = I``: every reviewer authors exactly one work."""
        if qualities is None:
            qualities = np.arange(1, n + 1, dtype=float)
        eye = np.eye(n, dtype=bool)
        return cls(n=n, m=n, lam=lam, mu=lam, conflicts=eye, authorship=eye, qualities=qualities)

    def authored(self, reviewer: int) -> np.ndarray:
        return np.flatnonzero(self.authorship[reviewer])

    def digest(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(np.array([self.n, self.m, self.lam, self.mu], dtype=np.int64).tobytes())
        h.update(np.packbits(self.conflicts).tobytes())
        h.update(np.packbits(self.authorship).tobytes())
        h.update(self.qualities.tobytes())
        return h.hexdigest()


@dataclass(frozen=True, eq=False)
class Assignment:
    """Binary ``(m, n)`` review assignment ``M``; ``per_reviewer[i]`` lists ``M(i)`` ascending."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix, bool))

    @classmethod
    def from_lists(cls, per_reviewer: Sequence[Iterable[int]], n: int) -> "Assignment":
        mat = np.zeros((len(per_reviewer), n), dtype=bool)
        for i, works in enumerate(per_reviewer):
            for j in works:
                if mat[i, j]:
                    raise errors.RowLoadViolation(f"reviewer {i} assigned work {j} twice", reviewer=i)
                mat[i, j] = True
        return cls(mat)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    @cached_property
    def per_reviewer(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(int(j) for j in np.flatnonzero(row)) for row in self.matrix)

    def __eq__(self, other):
        return isinstance(other, Assignment) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(np.packbits(self.matrix).tobytes())


@dataclass(frozen=True)
class Ranking:
    reviewer: int
    order: tuple[int, ...]  # best first


@dataclass(frozen=True)
class ReviewProfile:
    """One total ranking per reviewer, indexed by reviewer id."""

    orders: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "orders", tuple(tuple(int(j) for j in o) for o in self.orders))

    @classmethod
    def from_rankings(cls, rankings: Iterable[Ranking], m: int) -> "ReviewProfile":
        by_reviewer: dict[int, tuple[int, ...]] = {}
        for r in rankings:
            if r.reviewer in by_reviewer or not 0 <= r.reviewer < m:
                raise errors.MissingReviewer(f"reviewer {r.reviewer} duplicated or out of range", reviewer=r.reviewer)
            by_reviewer[r.reviewer] = tuple(r.order)
        for i in range(m):
            if i not in by_reviewer:
                raise errors.MissingReviewer(f"no ranking for reviewer {i}", reviewer=i)
        return cls(tuple(by_reviewer[i] for i in range(m)))

    @classmethod
    def from_array(cls, orders: np.ndarray) -> "ReviewProfile":
        return cls(tuple(map(tuple, np.asarray(orders).tolist())))

    @property
    def m(self) -> int:
        return len(self.orders)

    @property
    def rankings(self) -> tuple[Ranking, ...]:
        return tuple(Ranking(i, o) for i, o in enumerate(self.orders))

    @cached_property
    def array(self) -> np.ndarray:
        """``(m, mu)`` integer array of orders; requires equal-length rankings."""
        arr = np.array(self.orders, dtype=np.int64)
        if arr.ndim != 2:
            arr = arr.reshape(len(self.orders), -1)
        arr.setflags(write=False)
        return arr

    def replace(self, reviewer: int, order: Sequence[int]) -> "ReviewProfile":
        orders = list(self.orders)
        orders[reviewer] = tuple(order)
        return ReviewProfile(tuple(orders))


@dataclass(frozen=True)
class Topology:
    """Bipartite graph over ``m`` left (reviewer) nodes and ``n`` right (work) nodes."""

    m: int
    n: int
    edges: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    @classmethod
    def from_assignment(cls, assignment: Assignment) -> "Topology":
        rows, cols = np.nonzero(assignment.matrix)
        return cls(assignment.m, assignment.n, tuple(zip(rows.tolist(), cols.tolist())))


def validate_instance(inst: ProblemInstance) -> None:
    m, n = inst.m, inst.n
    if m < 1 or n < 1 or inst.lam < 0 or inst.mu < 0:
        raise errors.ShapeMismatch("n, m must be positive and loads non-negative")
    for name in ("conflicts", "authorship"):
        if getattr(inst, name).shape != (m, n):
            raise errors.ShapeMismatch(f"{name} has shape {getattr(inst, name).shape}, expected {(m, n)}")
    if inst.qualities.shape != (n,):
        raise errors.ShapeMismatch(f"qualities has shape {inst.qualities.shape}, expected {(n,)}")
    if n * inst.lam != m * inst.mu:
        raise errors.LoadMismatch(f"n*lambda = {n * inst.lam} != m*mu = {m * inst.mu}")
    bad = inst.authorship & ~inst.conflicts
    if bad.any():
        i, j = (int(x) for x in np.argwhere(bad)[0])
        raise errors.AuthorshipOutsideConflict(f"reviewer {i} authors work {j} without a conflict entry",
                                               reviewer=i, work=j)


def validate_assignment(inst: ProblemInstance, assignment: Assignment) -> None:
    mat = assignment.matrix
    if mat.shape != (inst.m, inst.n):
        raise errors.ShapeMismatch(f"assignment has shape {mat.shape}, expected {(inst.m, inst.n)}")
    rows = mat.sum(axis=1)
    if (rows != inst.mu).any():
        i = int(np.flatnonzero(rows != inst.mu)[0])
        raise errors.RowLoadViolation(f"reviewer {i} has {rows[i]} works, expected {inst.mu}", reviewer=i)
    cols = mat.sum(axis=0)
    if (cols != inst.lam).any():
        j = int(np.flatnonzero(cols != inst.lam)[0])
        raise errors.ColumnLoadViolation(f"work {j} has {cols[j]} reviewers, expected {inst.lam}", work=j)
    clash = mat & inst.conflicts
    if clash.any():
        i, j = (int(x) for x in np.argwhere(clash)[0])
        raise errors.ConflictAssigned(f"reviewer {i} assigned conflicting work {j}", reviewer=i, work=j)


def validate_profile(assignment: Assignment, profile: ReviewProfile) -> None:
    if profile.m != assignment.m:
        i = min(profile.m, assignment.m)
        raise errors.MissingReviewer(f"profile has {profile.m} rankings for {assignment.m} reviewers", reviewer=i)
    for i, (order, assigned) in enumerate(zip(profile.orders, assignment.per_reviewer)):
        allowed = set(assigned)
        for j in order:
            if j not in allowed:
                raise errors.UnassignedWorkRanked(f"reviewer {i} ranked unassigned work {j}", reviewer=i, work=j)
        if len(order) != len(allowed) or len(set(order)) != len(order):
            raise errors.NotAPermutation(f"ranking of reviewer {i} is not a permutation of its works", reviewer=i)


def validate_topology(topology: Topology, lam: int, mu: int) -> None:
    edges = topology.edges
    if len(set(edges)) != len(edges):
        raise errors.TopologyDegreeMismatch("topology has duplicate edges")
    left = np.zeros(topology.m, dtype=int)
    right = np.zeros(topology.n, dtype=int)
    for a, b in edges:
        if not (0 <= a < topology.m and 0 <= b < topology.n):
            raise errors.TopologyDegreeMismatch(f"edge ({a}, {b}) out of range")
        left[a] += 1
        right[b] += 1
    if (left != mu).any():
        a = int(np.flatnonzero(left != mu)[0])
        raise errors.TopologyDegreeMismatch(f"left node {a} has degree {left[a]}, expected {mu}", node=a)
    if (right != lam).any():
        b = int(np.flatnonzero(right != lam)[0])
        raise errors.TopologyDegreeMismatch(f"right node {b} has degree {right[b]}, expected {lam}", node=b)
