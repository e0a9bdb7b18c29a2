"""Brute-force reference implementations, written without the package's code paths.

Everything is pure Python: lists, dicts, ``itertools`` and exact ``Fraction``
arithmetic.  They are only fast enough for tiny instances.
"""

from __future__ import annotations

import itertools
from fractions import Fraction


def borda_scores(orders, n):
    score = [0] * n
    for order in orders:
        for p, w in enumerate(order, start=1):
            score[w] += p
    return score


def shared_positions(score):
    """Average of the places a group of tied works occupies."""
    out = []
    for s in score:
        better = sum(1 for x in score if x < s)
        tied = sum(1 for x in score if x == s)
        out.append(Fraction(2 * better + tied + 1, 2))
    return out


def positions(orders, n):
    return shared_positions(borda_scores(orders, n))


def expected_positions(orders, i, works, n):
    """Mean position of every work over all orderings of ``works`` by reviewer ``i``."""
    total = [Fraction(0)] * n
    perms = list(itertools.permutations(works))
    for perm in perms:
        trial = list(orders)
        trial[i] = perm
        for j, p in enumerate(positions(trial, n)):
            total[j] += p
    return [t / len(perms) for t in total]


def impacts(orders, assignment, n, reference=None):
    """``impact[i][j]``: actual minus uniform-expected position of ``j`` for ranking ``i``."""
    reference = orders if reference is None else reference
    out = []
    for i, works in enumerate(assignment):
        trial = list(reference)
        trial[i] = orders[i]
        actual = positions(trial, n)
        expected = expected_positions(reference, i, works, n)
        out.append([a - e for a, e in zip(actual, expected)])
    return out


def statistic(orders, authorship, assignment, n, reference=None):
    imp = impacts(orders, assignment, n, reference)
    return sum((imp[i][j] for i, row in enumerate(authorship) for j, a in enumerate(row) if a), Fraction(0))


def valid_assignments(conflicts, lam, mu):
    """Every assignment (tuple of sorted work tuples) respecting loads and conflicts."""
    m, n = len(conflicts), len(conflicts[0])
    options = [[c for c in itertools.combinations(range(n), mu) if not any(conflicts[i][j] for j in c)]
               for i in range(m)]
    found = []

    def rec(i, load, cur):
        if i == m:
            if all(x == lam for x in load):
                found.append(tuple(cur))
            return
        for c in options[i]:
            if all(load[j] < lam for j in c):
                for j in c:
                    load[j] += 1
                cur.append(c)
                rec(i + 1, load, cur)
                cur.pop()
                for j in c:
                    load[j] -= 1

    rec(0, [0] * n, [])
    return found


def permuted(matrix, rows, cols):
    """Entry ``(r, c)`` moves to ``(rows[r], cols[c])``."""
    m, n = len(matrix), len(matrix[0])
    out = [[False] * n for _ in range(m)]
    for r in range(m):
        for c in range(n):
            if matrix[r][c]:
                out[rows[r]][cols[c]] = True
    return out


def null_multiset(conflicts, authorship, assignment, n, orders, reference=None):
    """Statistic under every permutation pair whose permuted conflicts avoid the assignment."""
    m = len(conflicts)
    assigned = {(i, j) for i, works in enumerate(assignment) for j in works}
    imp = impacts(orders, assignment, n, reference)
    values = []
    for rows in itertools.permutations(range(m)):
        for cols in itertools.permutations(range(n)):
            c = permuted(conflicts, rows, cols)
            if any(c[i][j] for i, j in assigned):
                continue
            a = permuted(authorship, rows, cols)
            values.append(sum((imp[i][j] for i in range(m) for j in range(n) if a[i][j]), Fraction(0)))
    return values


def rejects(tau, phi, alpha):
    """Strictly below the ``(floor(alpha |phi|) + 1)``-th smallest null value."""
    k = int(Fraction(str(alpha)) * len(phi)) + 1
    return tau < sorted(phi)[k - 1]
