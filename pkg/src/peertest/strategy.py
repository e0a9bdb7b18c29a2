"""Reviewer behaviour: noisy perception, truthful ranking and manipulation strategies."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import errors


class StrategyKind(enum.Enum):
    TRUTHFUL = "Truthful"
    REVERSE = "Reverse"
    DISTANCE = "Distance"
    SEE_SAW = "SeeSaw"
    BETTER_TO_BOTTOM = "BetterToBottom"
    WORSE_TO_BOTTOM = "WorseToBottom"
    TWO_X_DISTANCE = "TwoXDistance"

    @classmethod
    def parse(cls, name: str) -> "StrategyKind":
        key = name.replace("-", "").replace("_", "").replace(" ", "").lower()
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        if key in ("2xdistance", "twoxdistance"):
            return cls.TWO_X_DISTANCE
        raise errors.UnknownPreset(f"unknown strategy {name!r}", name=name)


MANIPULATIONS = tuple(k for k in StrategyKind if k is not StrategyKind.TRUTHFUL)


class NoiseSchedule(enum.Enum):
    TOP_HALF_ZERO = "top_half_zero"
    LINEAR_IN_RANK = "linear_in_rank"


def noise_level(schedule: NoiseSchedule, reviewer_rank: int, n: int, sigma: float) -> float:
    """Per-reviewer noise from the rank ``k`` (1 = best) of the reviewer's own work."""
    if not 1 <= reviewer_rank <= n:
        raise errors.RankOutOfRange(f"rank {reviewer_rank} outside 1..{n}", rank=reviewer_rank)
    if schedule is NoiseSchedule.TOP_HALF_ZERO:
        return 0.0 if reviewer_rank <= n / 2 else float(sigma)
    return float(sigma) * reviewer_rank / n


@dataclass(frozen=True)
class NoiseModel:
    """``none``, ``gaussian`` (one sigma for all) or ``per_reviewer`` (explicit sigmas).

    ``sigma = inf`` makes perceived utilities pure noise, i.e. uniformly random orders.
    """

    kind: str = "none"
    sigma: float = 0.0
    sigmas: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "per_reviewer"):
            raise errors.ConfigError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0 or any(s < 0 for s in self.sigmas):
            raise errors.ConfigError("noise levels must be non-negative")

    @classmethod
    def gaussian(cls, sigma: float) -> "NoiseModel":
        return cls("gaussian", float(sigma))

    @classmethod
    def per_reviewer(cls, schedule: NoiseSchedule, sigma: float, reviewer_ranks: Sequence[int], n: int) -> "NoiseModel":
        return cls("per_reviewer", float(sigma),
                   tuple(noise_level(schedule, int(k), n, sigma) for k in reviewer_ranks))

    def level(self, reviewer: int) -> float:
        if self.kind == "none":
            return 0.0
        if self.kind == "gaussian":
            return self.sigma
        return self.sigmas[reviewer]


def perceive(values, model: NoiseModel, reviewer: int, seed=None) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    sigma = model.level(reviewer)
    if sigma == 0:
        return values.copy()
    rng = np.random.default_rng(seed)
    if math.isinf(sigma):
        return rng.standard_normal(values.shape)
    return values + sigma * rng.standard_normal(values.shape)


def two_x_reflect(v, n: int):
    """Map a value to ``min(n - v, v - 1)``."""
    return np.minimum(n - np.asarray(v, dtype=float), np.asarray(v, dtype=float) - 1)


def _by(items, key):
    return [w for w, _ in sorted(items, key=key)]


def _distance(own: float, items):
    # equidistant works: the lower value goes first, then work id
    return _by(items, key=lambda it: (-abs(it[1] - own), it[1], it[0]))


def apply_strategy(kind: StrategyKind, own_value: float, assigned: Sequence[tuple[int, float]], n: int) -> tuple[int, ...]:
    """Order ``assigned`` (pairs of work id and perceived value), best first.

    Ties that the strategy itself does not settle go to the lower work id.
    """
    items = [(int(w), float(v)) for w, v in assigned]
    if kind is StrategyKind.SEE_SAW:
        kind = StrategyKind.REVERSE if own_value > n / 2 else StrategyKind.TRUTHFUL

    if kind is StrategyKind.TRUTHFUL:
        out = _by(items, key=lambda it: (-it[1], it[0]))
    elif kind is StrategyKind.REVERSE:
        out = _by(items, key=lambda it: (it[1], it[0]))
    elif kind is StrategyKind.DISTANCE:
        out = _distance(own_value, items)
    elif kind is StrategyKind.TWO_X_DISTANCE:
        mapped = [(w, float(two_x_reflect(v, n))) for w, v in items]
        out = _distance(float(two_x_reflect(own_value, n)), mapped)
    elif kind is StrategyKind.BETTER_TO_BOTTOM:
        lower = [it for it in items if it[1] <= own_value]
        upper = [it for it in items if it[1] > own_value]
        out = _by(lower, key=lambda it: (it[1], it[0])) + _by(upper, key=lambda it: (-it[1], it[0]))
    elif kind is StrategyKind.WORSE_TO_BOTTOM:
        upper = [it for it in items if it[1] > own_value]
        lower = [it for it in items if it[1] <= own_value]
        out = _by(upper, key=lambda it: (it[1], it[0])) + _by(lower, key=lambda it: (-it[1], it[0]))
    else:  # pragma: no cover
        raise errors.ConfigError(f"unhandled strategy {kind}")
    return tuple(out)


@dataclass(frozen=True)
class StrategyMix:
    weights: Mapping[StrategyKind, float] = field(default_factory=dict)
    name: str = "custom"

    def __post_init__(self):
        w = {StrategyKind(k) if not isinstance(k, StrategyKind) else k: float(v) for k, v in self.weights.items()}
        if any(v < 0 for v in w.values()):
            raise errors.EmptyMix("mix weights must be non-negative")
        total = sum(w.values())
        if total <= 0:
            raise errors.EmptyMix(f"mix {self.name!r} has no positive weight")
        object.__setattr__(self, "weights", {k: v / total for k, v in w.items() if v > 0})

    @classmethod
    def pure(cls, kind: StrategyKind) -> "StrategyMix":
        return cls({kind: 1.0}, kind.value)


_TABLE_1 = {
    "round1": ({"Reverse": .50, "Distance": .37, "SeeSaw": .09, "BetterToBottom": .02, "WorseToBottom": .02}, 5),
    "round2": ({"Reverse": .33, "Distance": .53, "SeeSaw": .08, "BetterToBottom": .04, "WorseToBottom": .02}, 7),
    "round3": ({"Reverse": .05, "Distance": .93, "SeeSaw": .02}, 4),
    "round4": ({"Reverse": .03, "Distance": .96, "SeeSaw": .01}, 4),
    "round5": ({"Reverse": .06, "Distance": .78, "TwoXDistance": .16}, 18),
}
PARTICIPANTS = 55


def mix_preset(name: str) -> StrategyMix:
    """``round1``..``round5``; suffix ``u`` (e.g. ``round3u``) counts unclassified players as truthful."""
    key = name.lower()
    base, with_unclassified = (key[:-1], True) if key.endswith("u") and key[:-1] in _TABLE_1 else (key, False)
    if base in _TABLE_1:
        fractions, unclassified = _TABLE_1[base]
        weights = {StrategyKind(k): v for k, v in fractions.items()}
        if with_unclassified:
            classified = (PARTICIPANTS - unclassified) / PARTICIPANTS
            weights = {k: v * classified for k, v in weights.items()}
            weights[StrategyKind.TRUTHFUL] = unclassified / PARTICIPANTS
        return StrategyMix(weights, key)
    if key == "truthful":
        return StrategyMix.pure(StrategyKind.TRUTHFUL)
    try:
        return StrategyMix.pure(StrategyKind.parse(name))
    except errors.UnknownPreset:
        raise errors.UnknownPreset(f"unknown strategy mix {name!r}", name=name) from None


MIX_PRESETS = tuple(sorted(_TABLE_1)) + tuple(k + "u" for k in sorted(_TABLE_1))


def sample_mix(mix: StrategyMix, m: int, seed=None) -> list[StrategyKind]:
    if not mix.weights:
        raise errors.EmptyMix("empty strategy mix")
    rng = np.random.default_rng(seed)
    kinds = list(mix.weights)
    p = np.array([mix.weights[k] for k in kinds])
    idx = rng.choice(len(kinds), size=m, p=p / p.sum())
    return [kinds[i] for i in idx]
