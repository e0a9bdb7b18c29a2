"""Uniform samplers for review assignments.

``sample_assignment`` draws uniformly from all conflict-free assignments with
the prescribed loads using the configuration model: each reviewer owns ``mu``
consecutive stub slots, the ``n * lambda`` work stubs are shuffled into those
slots, and a pairing is rejected if a reviewer receives the same work twice or a
conflicting work.  Every simple conflict-free graph corresponds to exactly
``(lambda!)^n (mu!)^m`` pairings, so accepted draws are exactly uniform.

The shuffle is a compiled Fisher-Yates pass that abandons a candidate as soon
as the stub just placed clashes with its reviewer's block.  Validity depends
only on the finished permutation, so stopping early changes nothing about which
permutations are accepted; it just avoids finishing doomed ones.  The pass can
start from whatever arrangement the last attempt left behind because
Fisher-Yates is uniform from any starting order.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from . import errors
from .core import Assignment, ProblemInstance, Topology, validate_topology

ATTEMPT_CAP = 100_000
_BATCH_ELEMENTS = 2_000_000


@njit(cache=True)
def _pairing_kernel(seed, slots, m, mu, conflicts, max_attempts):  # pragma: no cover - compiled
    # Returns the number of attempts used (slots then holds a valid pairing), or -1.
    np.random.seed(seed)
    total = m * mu
    for attempt in range(max_attempts):
        bad = False
        for r in range(m):
            base = r * mu
            for t in range(base, base + mu):
                j = np.random.randint(t, total)
                w = slots[j]
                slots[j] = slots[t]
                slots[t] = w
                if conflicts[r, w]:
                    bad = True
                    break
                for b in range(base, t):
                    if slots[b] == w:
                        bad = True
                        break
                if bad:
                    break
            if bad:
                break
        if not bad:
            return attempt + 1
    return -1


def sample_assignment(inst: ProblemInstance, seed=None, *, attempt_cap: int = ATTEMPT_CAP) -> Assignment:
    rng = np.random.default_rng(seed)
    m, n = inst.m, inst.n
    if m * inst.mu != n * inst.lam:
        raise errors.LoadMismatch(f"n*lambda = {n * inst.lam} != m*mu = {m * inst.mu}")
    if inst.mu == 0:
        return Assignment(np.zeros((m, n), dtype=bool))
    if inst.mu > n - inst.conflicts.sum(axis=1).min() or inst.lam > m:
        raise errors.InfeasibleOrRejectionBudgetExhausted("loads exceed the non-conflicted capacity")
    slots = np.repeat(np.arange(n, dtype=np.int64), inst.lam)
    used = _pairing_kernel(np.uint32(rng.integers(2**32)), slots, m, inst.mu,
                           np.ascontiguousarray(inst.conflicts), attempt_cap)
    if used < 0:
        raise errors.InfeasibleOrRejectionBudgetExhausted(
            f"no valid assignment after {attempt_cap} configuration-model draws", attempts=attempt_cap)
    mat = np.zeros((m, n), dtype=bool)
    mat[np.repeat(np.arange(m), inst.mu), slots] = True
    return Assignment(mat)


def _batch_size(stubs: int, remaining: int) -> int:
    return int(max(1, min(4096, _BATCH_ELEMENTS // max(stubs, 1), remaining)))


def sample_assignment_on_topology(inst: ProblemInstance, topology: Topology, seed=None, *,
                                  attempt_cap: int = ATTEMPT_CAP) -> Assignment:
    """Place reviewers and works on the nodes of ``topology`` uniformly, avoiding conflicts."""
    if topology.m != inst.m or topology.n != inst.n:
        raise errors.TopologyDegreeMismatch(
            f"topology has {topology.m}x{topology.n} nodes, instance needs {inst.m}x{inst.n}")
    validate_topology(topology, inst.lam, inst.mu)
    rng = np.random.default_rng(seed)
    edges = np.array(topology.edges, dtype=np.int64).reshape(-1, 2)
    used = 0
    while used < attempt_cap:
        batch = _batch_size(inst.m + inst.n, attempt_cap - used)
        used += batch
        left = rng.permuted(np.broadcast_to(np.arange(inst.m), (batch, inst.m)), axis=1)
        right = rng.permuted(np.broadcast_to(np.arange(inst.n), (batch, inst.n)), axis=1)
        rev = left[:, edges[:, 0]]
        wrk = right[:, edges[:, 1]]
        ok = np.flatnonzero(~inst.conflicts[rev, wrk].any(axis=1))
        if ok.size:
            b = ok[0]
            mat = np.zeros((inst.m, inst.n), dtype=bool)
            mat[rev[b], wrk[b]] = True
            return Assignment(mat)
    raise errors.RejectionBudgetExhausted(f"no conflict-free placement after {used} draws", attempts=used)


def enumerate_assignments(inst: ProblemInstance) -> list[Assignment]:
    """All valid assignments, by brute force over row subsets.  Tiny instances only."""
    from itertools import combinations

    options = [
        [c for c in combinations(range(inst.n), inst.mu) if not inst.conflicts[i, list(c)].any()]
        for i in range(inst.m)
    ]
    out: list[Assignment] = []
    counts = np.zeros(inst.n, dtype=int)
    rows: list[tuple[int, ...]] = []

    def rec(i: int) -> None:
        if i == inst.m:
            if (counts == inst.lam).all():
                out.append(Assignment.from_lists(rows, inst.n))
            return
        for c in options[i]:
            idx = list(c)
            counts[idx] += 1
            if (counts <= inst.lam).all():
                rows.append(c)
                rec(i + 1)
                rows.pop()
            counts[idx] -= 1

    rec(0)
    return out
