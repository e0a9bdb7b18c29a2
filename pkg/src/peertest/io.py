"""On-disk formats.

* instance: JSON with ``n, m, lambda, mu``, ``qualities`` (one per work),
  optional ``reviewers``/``works`` id lists (default ``"1".."m"`` / ``"1".."n"``)
  and ``conflicts``/``authorship`` as sorted ``[reviewer, work]`` id pairs;
* assignment: one ``reviewer: work work ...`` line per reviewer;
* profile: one ``reviewer: work > work > ...`` line per reviewer, best first;
* topology: one ``left_node right_node`` pair of 0-based node indices per line.

Blank lines and lines starting with ``#`` are ignored in the text formats.
External ids are strings; everything is mapped to dense indices on load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import errors
from .core import (Assignment, ProblemInstance, ReviewProfile, Topology, validate_assignment, validate_instance,
                   validate_profile)


@dataclass(frozen=True)
class Ids:
    reviewers: tuple[str, ...]
    works: tuple[str, ...]

    @classmethod
    def default(cls, m: int, n: int) -> "Ids":
        return cls(tuple(str(i + 1) for i in range(m)), tuple(str(j + 1) for j in range(n)))

    def reviewer_index(self) -> dict[str, int]:
        return {r: i for i, r in enumerate(self.reviewers)}

    def work_index(self) -> dict[str, int]:
        return {w: j for j, w in enumerate(self.works)}

    def externalize(self, exc: errors.PeerTestError) -> errors.PeerTestError:
        """Same error with reviewer/work indices replaced by external ids."""
        details = dict(exc.details)
        if isinstance(details.get("reviewer"), (int, np.integer)) and 0 <= details["reviewer"] < len(self.reviewers):
            details["reviewer"] = self.reviewers[details["reviewer"]]
        if isinstance(details.get("work"), (int, np.integer)) and 0 <= details["work"] < len(self.works):
            details["work"] = self.works[details["work"]]
        msg = str(exc)
        if "reviewer" in details and "work" in details:
            msg = f"{exc.code}: reviewer {details['reviewer']}, work {details['work']}"
        elif "reviewer" in details:
            msg = f"{exc.code}: reviewer {details['reviewer']}"
        out = type(exc)(msg, **details)
        return out


def _num(x: float):
    return int(x) if float(x).is_integer() else float(x)


def instance_to_json(inst: ProblemInstance, ids: Ids | None = None) -> str:
    ids = ids or Ids.default(inst.m, inst.n)
    doc = {
        "n": inst.n, "m": inst.m, "lambda": inst.lam, "mu": inst.mu,
        "reviewers": list(ids.reviewers), "works": list(ids.works),
        "qualities": [_num(v) for v in inst.qualities],
        "conflicts": [[ids.reviewers[i], ids.works[j]] for i, j in np.argwhere(inst.conflicts)],
        "authorship": [[ids.reviewers[i], ids.works[j]] for i, j in np.argwhere(inst.authorship)],
    }
    body = ",\n".join(f"  {json.dumps(k)}: {json.dumps(v)}" for k, v in doc.items())
    return "{\n" + body + "\n}\n"


def instance_from_json(text: str) -> tuple[ProblemInstance, Ids]:
    try:
        doc = json.loads(text)
        n, m, lam, mu = (int(doc[k]) for k in ("n", "m", "lambda", "mu"))
    except (ValueError, KeyError, TypeError) as exc:
        raise errors.ParseError(f"malformed instance document: {exc}") from exc
    ids = Ids(tuple(str(r) for r in doc.get("reviewers", Ids.default(m, n).reviewers)),
              tuple(str(w) for w in doc.get("works", Ids.default(m, n).works)))
    if len(ids.reviewers) != m or len(ids.works) != n:
        raise errors.ShapeMismatch("reviewer/work id lists do not match m/n")
    if len(set(ids.reviewers)) != m or len(set(ids.works)) != n:
        raise errors.ParseError("duplicate reviewer or work ids")
    ri, wi = ids.reviewer_index(), ids.work_index()

    def matrix(key: str) -> np.ndarray:
        mat = np.zeros((m, n), dtype=bool)
        for pair in doc.get(key, []):
            try:
                r, w = (str(x) for x in pair)
                mat[ri[r], wi[w]] = True
            except (KeyError, ValueError) as exc:
                raise errors.ParseError(f"bad {key} entry {pair!r}") from exc
        return mat

    inst = ProblemInstance(n=n, m=m, lam=lam, mu=mu, conflicts=matrix("conflicts"),
                           authorship=matrix("authorship"),
                           qualities=np.asarray(doc.get("qualities", [0] * n), dtype=float))
    validate_instance(inst)
    return inst, ids


def _lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise errors.ParseError(f"line {lineno}: expected 'reviewer: ...'", line=lineno)
        head, body = line.split(":", 1)
        yield lineno, head.strip(), body.strip()


def assignment_to_text(assignment: Assignment, ids: Ids) -> str:
    return "".join(f"{ids.reviewers[i]}: {' '.join(ids.works[j] for j in works)}\n"
                   for i, works in enumerate(assignment.per_reviewer))


def assignment_from_text(text: str, inst: ProblemInstance, ids: Ids) -> Assignment:
    ri, wi = ids.reviewer_index(), ids.work_index()
    rows: dict[int, list[int]] = {}
    for lineno, head, body in _lines(text):
        if head not in ri:
            raise errors.MissingReviewer(f"line {lineno}: unknown reviewer {head!r}", reviewer=head)
        if ri[head] in rows:
            raise errors.ParseError(f"line {lineno}: reviewer {head!r} listed twice", reviewer=head)
        try:
            rows[ri[head]] = [wi[w] for w in body.split()]
        except KeyError as exc:
            raise errors.ParseError(f"line {lineno}: unknown work {exc.args[0]!r}", reviewer=head) from None
    for i, r in enumerate(ids.reviewers):
        if i not in rows:
            raise errors.MissingReviewer(f"no assignment line for reviewer {r}", reviewer=r)
    try:
        assignment = Assignment.from_lists([rows[i] for i in range(inst.m)], inst.n)
        validate_assignment(inst, assignment)
    except errors.ValidationError as exc:
        raise ids.externalize(exc) from exc
    return assignment


def profile_to_text(profile: ReviewProfile, ids: Ids) -> str:
    return "".join(f"{ids.reviewers[i]}: {' > '.join(ids.works[j] for j in order)}\n"
                   for i, order in enumerate(profile.orders))


def profile_from_text(text: str, assignment: Assignment, ids: Ids) -> ReviewProfile:
    ri, wi = ids.reviewer_index(), ids.work_index()
    orders: dict[int, tuple[int, ...]] = {}
    for lineno, head, body in _lines(text):
        if head not in ri:
            raise errors.MissingReviewer(f"line {lineno}: unknown reviewer {head!r}", reviewer=head)
        if ri[head] in orders:
            raise errors.ParseError(f"line {lineno}: reviewer {head!r} listed twice", reviewer=head)
        tokens = [t.strip() for t in body.split(">")] if body else []
        order = []
        for t in tokens:
            if t not in wi:
                raise errors.UnassignedWorkRanked(f"UnassignedWorkRanked: reviewer {head}, work {t}",
                                                  reviewer=head, work=t)
            order.append(wi[t])
        orders[ri[head]] = tuple(order)
    for i, r in enumerate(ids.reviewers):
        if i not in orders:
            raise errors.MissingReviewer(f"MissingReviewer: reviewer {r}", reviewer=r)
    profile = ReviewProfile(tuple(orders[i] for i in range(len(ids.reviewers))))
    try:
        validate_profile(assignment, profile)
    except errors.ValidationError as exc:
        raise ids.externalize(exc) from exc
    return profile


def topology_from_text(text: str, m: int, n: int) -> Topology:
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            a, b = int(parts[0]), int(parts[1])
            if len(parts) != 2:
                raise ValueError
        except (ValueError, IndexError):
            raise errors.ParseError(f"line {lineno}: expected 'reviewer_node work_node'", line=lineno) from None
        edges.append((a, b))
    return Topology(m, n, tuple(edges))


def topology_to_text(topology: Topology) -> str:
    return "".join(f"{a} {b}\n" for a, b in topology.edges)


BUNDLE_FILES = {"instance": "instance.json", "assignment": "assignment.txt", "profile": "profile.txt",
                "impartial": "impartial.txt"}


@dataclass(frozen=True)
class DatasetBundle:
    instance: ProblemInstance
    ids: Ids
    assignment: Assignment
    profile: ReviewProfile
    impartial: ReviewProfile | None = None


def write_bundle(directory, bundle: DatasetBundle) -> dict[str, str]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = {}
    contents = {
        "instance": instance_to_json(bundle.instance, bundle.ids),
        "assignment": assignment_to_text(bundle.assignment, bundle.ids),
        "profile": profile_to_text(bundle.profile, bundle.ids),
    }
    if bundle.impartial is not None:
        contents["impartial"] = profile_to_text(bundle.impartial, bundle.ids)
    for key, text in contents.items():
        path = d / BUNDLE_FILES[key]
        path.write_text(text)
        written[key] = str(path)
    return written


def load_bundle(instance_path, assignment_path, profile_path, impartial_path=None) -> DatasetBundle:
    inst, ids = instance_from_json(Path(instance_path).read_text())
    assignment = assignment_from_text(Path(assignment_path).read_text(), inst, ids)
    profile = profile_from_text(Path(profile_path).read_text(), assignment, ids)
    impartial = None
    if impartial_path is not None:
        try:
            impartial = profile_from_text(Path(impartial_path).read_text(), assignment, ids)
        except errors.ValidationError as exc:
            raise errors.SupervisionAssignmentMismatch(str(exc), **exc.details) from exc
    return DatasetBundle(inst, ids, assignment, profile, impartial)


def load_bundle_dir(directory) -> DatasetBundle:
    d = Path(directory)
    imp = d / BUNDLE_FILES["impartial"]
    return load_bundle(d / BUNDLE_FILES["instance"], d / BUNDLE_FILES["assignment"], d / BUNDLE_FILES["profile"],
                       imp if imp.exists() else None)
