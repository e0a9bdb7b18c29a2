"""Monte Carlo experiments: expected gain of strategies, power and false-alarm rates, runtime.

Each trial gets its own seed derived from ``(master seed, experiment id, grid
point, trial)`` so grids can grow without disturbing earlier rows, and reports
are identical for any worker count.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import permutations
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__, errors
from .aggregate import AggregationRule, contributions, tied_positions, total_scores
from .assign import enumerate_assignments, sample_assignment
from .core import Assignment, ProblemInstance, ReviewProfile
from .detect import GROUND_TRUTH, TestConfig, ground_truth_profile, run_test
from .strategy import (MANIPULATIONS, NoiseModel, NoiseSchedule, StrategyKind, StrategyMix, apply_strategy,
                       mix_preset, perceive, sample_mix)

log = logging.getLogger(__name__)

INSTANCE_PRESETS = {
    "game20": lambda: ProblemInstance.identity(20, 4),
    "toy5": lambda: ProblemInstance.identity(5, 3),
}
DEFAULT_FRACTIONS = tuple(round(0.1 * i, 1) for i in range(11))
EXPERIMENTS = ("power", "noisy_supervision", "false_alarm", "gain", "runtime")
# Rejection at game20 densities needs ~9000 draws on average; a long experiment
# makes tens of thousands of assignments, so the default cap would eventually trip.
# The cap only bounds running time: accepted draws are uniform whatever its value.
SIM_ATTEMPT_CAP = 10_000_000


def instance_preset(name: str) -> ProblemInstance:
    try:
        return INSTANCE_PRESETS[name]()
    except KeyError:
        raise errors.UnknownPreset(f"unknown instance preset {name!r}", name=name) from None


def derive_seed(master: int, experiment: str, *indices: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master), spawn_key=(zlib.crc32(experiment.encode()),) + tuple(indices))


# -- trial building blocks -------------------------------------------------------------------

def own_values(inst: ProblemInstance) -> list[float | None]:
    """Quality of each reviewer's best authored work (``None`` for non-authors)."""
    out: list[float | None] = []
    for i in range(inst.m):
        works = inst.authored(i)
        out.append(float(inst.qualities[works].max()) if works.size else None)
    return out


def own_ranks(inst: ProblemInstance) -> list[int | None]:
    """Ground-truth position (1 = best) of each reviewer's best authored work."""
    order = np.argsort(-inst.qualities, kind="stable")
    rank = np.empty(inst.n, dtype=int)
    rank[order] = np.arange(1, inst.n + 1)
    out: list[int | None] = []
    for i in range(inst.m):
        works = inst.authored(i)
        out.append(int(rank[works].min()) if works.size else None)
    return out


def reviewer_noise(inst: ProblemInstance, schedule: NoiseSchedule | None, sigma: float) -> NoiseModel:
    if sigma == 0:
        return NoiseModel()
    if schedule is None:
        return NoiseModel.gaussian(sigma)
    ranks = [k if k is not None else inst.n for k in own_ranks(inst)]
    return NoiseModel.per_reviewer(schedule, sigma, ranks, inst.n)


def simulate_profile(inst: ProblemInstance, assignment: Assignment, kinds: Sequence[StrategyKind],
                     noise: NoiseModel, seed=None) -> ReviewProfile:
    """Rankings of every reviewer: perceive assigned qualities, then apply its strategy.

    Reviewers who author nothing have nothing to gain and rank truthfully.
    """
    rng = np.random.default_rng(seed)
    values = own_values(inst)
    orders = []
    for i, works in enumerate(assignment.per_reviewer):
        seen = perceive(inst.qualities[list(works)], noise, i, rng)
        kind = kinds[i] if values[i] is not None else StrategyKind.TRUTHFUL
        orders.append(apply_strategy(kind, values[i] or 0.0, list(zip(works, seen)), inst.n))
    return ReviewProfile(tuple(orders))


def impartial_profile(inst: ProblemInstance, assignment: Assignment, sigma: float, seed=None) -> ReviewProfile:
    """Rankings from a random utility model with Gaussian noise ``sigma`` (0 = ground truth)."""
    if sigma == 0:
        return ground_truth_profile(inst, assignment)
    kinds = [StrategyKind.TRUTHFUL] * inst.m
    rng = np.random.default_rng(seed)
    orders = []
    for i, works in enumerate(assignment.per_reviewer):
        seen = perceive(inst.qualities[list(works)], NoiseModel.gaussian(sigma), i, rng)
        orders.append(apply_strategy(kinds[i], 0.0, list(zip(works, seen)), inst.n))
    return ReviewProfile(tuple(orders))


def assign_strategies(mix: StrategyMix, truthful_fraction: float, m: int, seed=None) -> list[StrategyKind]:
    rng = np.random.default_rng(seed)
    kinds = sample_mix(mix, m, rng)
    n_truthful = int(round(truthful_fraction * m))
    for i in rng.permutation(m)[:n_truthful]:
        kinds[i] = StrategyKind.TRUTHFUL
    return kinds


@dataclass(frozen=True)
class SupervisionMode:
    """``none``, ``ground-truth``, or noisy impartial rankings with Gaussian ``sigma``."""

    label: str
    sigma: float | None = None  # None = unsupervised

    @classmethod
    def parse(cls, spec) -> "SupervisionMode":
        if isinstance(spec, (int, float)) or (isinstance(spec, str) and spec.lower() in ("inf", "infinity")):
            sigma = float(spec)
            return cls(f"sigma={_fmt(sigma)}", sigma)
        if spec in ("none", None):
            return cls("none", None)
        if spec == GROUND_TRUTH:
            return cls(GROUND_TRUTH, 0.0)
        if isinstance(spec, str) and spec.startswith("sigma="):
            try:
                return cls.parse(float(spec.split("=", 1)[1]))
            except ValueError:
                pass
        raise errors.InvalidGrid(f"unknown supervision mode {spec!r}")


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return repr(float(x)).rstrip("0").rstrip(".") if x != int(x) else str(int(x))


@dataclass(frozen=True)
class TrialSpec:
    preset: str
    mix: StrategyMix
    truthful_fraction: float
    noise_schedule: NoiseSchedule | None
    noise_sigma: float
    supervisions: tuple[SupervisionMode, ...]
    alpha: float
    k: int


def detection_trial(spec: TrialSpec, seed: np.random.SeedSequence) -> tuple[bool, ...]:
    """One simulated dataset; the test's decision for every supervision mode."""
    inst = instance_preset(spec.preset)
    s_assign, s_kinds, s_noise, s_sup, s_null = seed.spawn(5)
    assignment = sample_assignment(inst, s_assign, attempt_cap=SIM_ATTEMPT_CAP)
    kinds = assign_strategies(spec.mix, spec.truthful_fraction, inst.m, s_kinds)
    noise = reviewer_noise(inst, spec.noise_schedule, spec.noise_sigma)
    profile = simulate_profile(inst, assignment, kinds, noise, s_noise)
    null_seed = int(np.random.default_rng(s_null).integers(2**63))
    out = []
    for mode, sup_seed in zip(spec.supervisions, s_sup.spawn(len(spec.supervisions))):
        reference = None if mode.sigma is None else impartial_profile(inst, assignment, mode.sigma, sup_seed)
        cfg = TestConfig(alpha=spec.alpha, k=spec.k, supervision=reference, seed=null_seed)
        out.append(run_test(inst, assignment, profile, cfg).reject)
    return tuple(out)


# -- gain of a single strategic reviewer -----------------------------------------------------

def parse_gain_strategy(name: str):
    """A strategy name, or ``fixed:p1,p2,...``: a fixed reordering of the truthful ranking (1-based)."""
    if isinstance(name, str) and name.startswith("fixed:"):
        perm = tuple(int(x) - 1 for x in name[6:].split(","))
        if sorted(perm) != list(range(len(perm))):
            raise errors.InvalidGrid(f"{name!r} is not a permutation")
        return perm
    return StrategyKind.parse(name) if isinstance(name, str) else name


def _strategy_label(strategy) -> str:
    if isinstance(strategy, StrategyKind):
        return strategy.value
    return "fixed:" + ",".join(str(p + 1) for p in strategy)


def gain_differences(inst: ProblemInstance, assignment: Assignment, strategies: Sequence,
                     rule: AggregationRule | None = None) -> np.ndarray:
    """``(len(strategies), n)`` array of truthful-minus-strategic final positions.

    Column ``p`` belongs to the reviewer whose work is ``p + 1``-th best; every
    other reviewer ranks truthfully.  Requires one authored work per reviewer.
    """
    rule = rule or AggregationRule.borda(inst.mu)
    truth = ground_truth_profile(inst, assignment)
    scores = total_scores(truth, rule, inst.n)
    truth_pos = tied_positions(scores)
    order = np.argsort(-inst.qualities, kind="stable")
    q = inst.qualities
    out = np.zeros((len(strategies), inst.n))
    for p, work in enumerate(order):
        reviewers = np.flatnonzero(inst.authorship[:, work])
        if reviewers.size != 1 or inst.authorship[reviewers[0]].sum() != 1:
            raise errors.InvalidGrid("gain curves need exactly one author per work and one work per author")
        r = int(reviewers[0])
        works = assignment.per_reviewer[r]
        base = scores - contributions(truth.orders[r], rule, inst.n)
        for s, strategy in enumerate(strategies):
            if isinstance(strategy, StrategyKind):
                ranked = apply_strategy(strategy, q[work], [(w, q[w]) for w in works], inst.n)
            else:
                ranked = tuple(truth.orders[r][t] for t in strategy)
            new = base + contributions(ranked, rule, inst.n)
            out[s, p] = truth_pos[work] - (1 + np.count_nonzero(new < new[work]) + np.count_nonzero(new <= new[work])) / 2
    return out


def _gain_trial(args, seed):
    preset, strategies = args
    inst = instance_preset(preset)
    return gain_differences(inst, sample_assignment(inst, seed, attempt_cap=SIM_ATTEMPT_CAP), strategies)


# -- reports ---------------------------------------------------------------------------------

@dataclass
class ExperimentReport:
    columns: list[str]
    rows: list[dict[str, Any]]
    metadata: dict[str, Any] = field(default_factory=dict)

    def to_csv(self) -> str:
        import csv
        import io

        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.columns, lineterminator="\r\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _cell(row.get(k)) for k in self.columns})
        return buf.getvalue()

    def write(self, path, *, include_timing: bool = False) -> tuple[str, str]:
        from pathlib import Path

        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_csv().encode())
        meta = dict(self.metadata)
        if not include_timing:
            meta.pop("wall_time_s", None)
        sidecar = path.with_suffix(".meta.json")
        sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return str(path), str(sidecar)


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else v


def rate_row(hits: int, trials: int) -> dict[str, Any]:
    p = hits / trials
    return {"estimate": p, "stderr": math.sqrt(p * (1 - p) / trials), "trials": trials}


# -- configuration ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    experiment: str = "power"
    preset: str = "game20"
    mixes: list[str] = field(default_factory=lambda: ["round4"])
    truthful_fractions: list[float] = field(default_factory=lambda: list(DEFAULT_FRACTIONS))
    supervision: list[Any] = field(default_factory=lambda: [GROUND_TRUTH, "none"])
    reviewer_noise: float = 0.0
    noise_setups: list[str] = field(default_factory=lambda: ["top_half_zero", "linear_in_rank"])
    sigmas: list[float] = field(default_factory=lambda: [0, 2, 4, 6])
    supervision_sigmas: list[Any] = field(default_factory=lambda: [0, 1, 2, 3, 5, "inf"])
    strategy: str = "Truthful"
    strategies: list[str] = field(default_factory=lambda: [k.value for k in MANIPULATIONS])
    exact: bool = False
    sizes: list[int] = field(default_factory=lambda: [20, 50, 100, 200])
    alpha: float = 0.05
    k: int = 100
    trials: int = 1000
    seed: int | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise errors.ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise errors.ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.preset not in INSTANCE_PRESETS:
            raise errors.UnknownPreset(f"unknown instance preset {self.preset!r}", name=self.preset)
        if not isinstance(self.trials, int) or self.trials < 1:
            raise errors.InvalidGrid(f"trials must be a positive integer, got {self.trials!r}")
        if self.seed is None:
            raise errors.ConfigError("a master seed is required")
        grids = {"power": ("mixes", "truthful_fractions", "supervision"),
                 "noisy_supervision": ("truthful_fractions", "supervision_sigmas"),
                 "false_alarm": ("noise_setups", "sigmas", "supervision"),
                 "gain": ("strategies",),
                 "runtime": ("sizes",)}[self.experiment]
        for name in grids:
            if not getattr(self, name):
                raise errors.InvalidGrid(f"grid {name!r} is empty")
        if any(not 0 <= f <= 1 for f in self.truthful_fractions):
            raise errors.InvalidGrid("truthful fractions must lie in [0, 1]")
        if any(float(s) < 0 for s in self.sigmas):
            raise errors.InvalidGrid("noise levels must be non-negative")
        for name in self.mixes:
            mix_preset(name)
        for s in self.supervision:
            SupervisionMode.parse(s)
        for s in self.supervision_sigmas:
            SupervisionMode.parse(s)
        for s in self.noise_setups:
            NoiseSchedule(s)
        for s in self.strategies:
            parse_gain_strategy(s)
        StrategyKind.parse(self.strategy)
        TestConfig(alpha=self.alpha, k=self.k)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()


# -- execution -------------------------------------------------------------------------------

def run_trials(fn: Callable, args, seeds: Sequence, threads: int = 1) -> list:
    """Evaluate ``fn(args, seed)`` for every seed, results in seed order."""
    if threads <= 1 or len(seeds) < 2:
        return [fn(args, s) for s in seeds]
    chunk = max(1, len(seeds) // (threads * 4))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, [args] * len(seeds), seeds, chunksize=chunk))


def _metadata(cfg: ExperimentConfig, started: float) -> dict[str, Any]:
    import platform

    return {
        "tool": "peertest",
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "config": asdict(cfg),
        "config_digest": cfg.digest(),
        "seed": cfg.seed,
        "wall_time_s": round(time.perf_counter() - started, 3),
    }


def power_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Detection rate per (mix, truthful fraction, supervision mode)."""
    started = time.perf_counter()
    modes = tuple(SupervisionMode.parse(s) for s in cfg.supervision)
    schedule = None
    rows = []
    grid = 0
    for mix_name in cfg.mixes:
        mix = mix_preset(mix_name)
        for frac in cfg.truthful_fractions:
            spec = TrialSpec(cfg.preset, mix, float(frac), schedule, float(cfg.reviewer_noise), modes,
                             cfg.alpha, cfg.k)
            seeds = [derive_seed(cfg.seed, "power", grid, t) for t in range(cfg.trials)]
            hits = np.array(run_trials(detection_trial, spec, seeds, threads), dtype=int).sum(axis=0)
            for mode, h in zip(modes, hits):
                rows.append({"mix": mix_name, "truthful_fraction": float(frac), "reviewer_noise": cfg.reviewer_noise,
                             "supervision": mode.label, **rate_row(int(h), cfg.trials)})
            grid += 1
    cols = ["mix", "truthful_fraction", "reviewer_noise", "supervision", "estimate", "stderr", "trials"]
    return ExperimentReport(cols, rows, _metadata(cfg, started))


def noisy_supervision_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Power against pure Distance when the impartial rankings carry Gaussian noise."""
    started = time.perf_counter()
    modes = tuple(SupervisionMode.parse(s) for s in cfg.supervision_sigmas)
    mix = StrategyMix.pure(StrategyKind.DISTANCE)
    rows = []
    for grid, frac in enumerate(cfg.truthful_fractions):
        spec = TrialSpec(cfg.preset, mix, float(frac), None, float(cfg.reviewer_noise), modes, cfg.alpha, cfg.k)
        seeds = [derive_seed(cfg.seed, "noisy_supervision", grid, t) for t in range(cfg.trials)]
        hits = np.array(run_trials(detection_trial, spec, seeds, threads), dtype=int).sum(axis=0)
        for mode, h in zip(modes, hits):
            rows.append({"truthful_fraction": float(frac), "supervision_sigma": _fmt(mode.sigma),
                         **rate_row(int(h), cfg.trials)})
    cols = ["truthful_fraction", "supervision_sigma", "estimate", "stderr", "trials"]
    return ExperimentReport(cols, rows, _metadata(cfg, started))


def false_alarm_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Rejection rate when reviewer noise shrinks with the quality of the reviewer's own work.

    Supervised runs use impartial rankings with noise ``sigma / 2``.  With
    ``strategy`` other than Truthful every reviewer manipulates on its noisy view.
    """
    started = time.perf_counter()
    kind = StrategyKind.parse(cfg.strategy)
    mix = StrategyMix.pure(kind)
    rows = []
    grid = 0
    for setup in cfg.noise_setups:
        schedule = NoiseSchedule(setup)
        for sigma in cfg.sigmas:
            sigma = float(sigma)
            modes = []
            for s in cfg.supervision:
                mode = SupervisionMode.parse(s)
                modes.append(mode if mode.sigma is None else SupervisionMode(mode.label, sigma / 2))
            spec = TrialSpec(cfg.preset, mix, 0.0, schedule, sigma, tuple(modes), cfg.alpha, cfg.k)
            seeds = [derive_seed(cfg.seed, "false_alarm", grid, t) for t in range(cfg.trials)]
            hits = np.array(run_trials(detection_trial, spec, seeds, threads), dtype=int).sum(axis=0)
            for mode, h in zip(modes, hits):
                rows.append({"setup": setup, "sigma": sigma, "strategy": kind.value, "supervision": mode.label,
                             **rate_row(int(h), cfg.trials)})
            grid += 1
    cols = ["setup", "sigma", "strategy", "supervision", "estimate", "stderr", "trials"]
    return ExperimentReport(cols, rows, _metadata(cfg, started))


@dataclass
class GainCurve:
    strategy: str
    gain: np.ndarray  # per ground-truth position, best first
    stderr: np.ndarray
    mean_gain: float
    mean_stderr: float
    trials: int


def expected_gain_curves(strategies: Sequence, preset: str = "game20", trials: int = 10_000, seed: int = 0,
                         *, exact: bool = False, threads: int = 1) -> list[GainCurve]:
    """Expected gain in final position of one strategic reviewer against truthful peers.

    Expectation is over the assignment only.  ``exact`` averages over every
    valid assignment instead of sampling (tiny presets only).  Positive gain
    means the strategy beats truthful ranking.
    """
    parsed = [parse_gain_strategy(s) for s in strategies]
    inst = instance_preset(preset)
    if exact:
        diffs = np.stack([gain_differences(inst, a, parsed) for a in enumerate_assignments(inst)])
    else:
        seeds = [derive_seed(seed, "gain", 0, t) for t in range(trials)]
        diffs = np.stack(run_trials(_gain_trial, (preset, parsed), seeds, threads))
    count = diffs.shape[0]
    curves = []
    for s, strategy in enumerate(parsed):
        d = diffs[:, s, :]
        per_trial_mean = d.mean(axis=1)
        if exact:
            se, mse = np.zeros(inst.n), 0.0
        else:
            se = d.std(axis=0, ddof=1) / math.sqrt(count) if count > 1 else np.zeros(inst.n)
            mse = float(per_trial_mean.std(ddof=1) / math.sqrt(count)) if count > 1 else 0.0
        curves.append(GainCurve(_strategy_label(strategy), d.mean(axis=0), se, float(per_trial_mean.mean()),
                                mse, count))
    return curves


def expected_gain_curve(strategy, preset: str = "game20", trials: int = 10_000, seed: int = 0,
                        **kw) -> GainCurve:
    return expected_gain_curves([strategy], preset, trials, seed, **kw)[0]


def gain_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    started = time.perf_counter()
    curves = expected_gain_curves(cfg.strategies, cfg.preset, cfg.trials, cfg.seed, exact=cfg.exact,
                                  threads=threads)
    rows = []
    for c in curves:
        for p, (g, se) in enumerate(zip(c.gain, c.stderr), start=1):
            rows.append({"strategy": c.strategy, "position": p, "estimate": float(g), "stderr": float(se),
                         "trials": c.trials})
        rows.append({"strategy": c.strategy, "position": "mean", "estimate": c.mean_gain,
                     "stderr": c.mean_stderr, "trials": c.trials})
    return ExperimentReport(["strategy", "position", "estimate", "stderr", "trials"], rows,
                            _metadata(cfg, started))


def runtime_bench(sizes: Sequence[int], k: int = 100, seed: int = 0, lam: int = 4,
                  alpha: float = 0.05) -> list[dict[str, Any]]:
    """Wall-clock seconds of one test run per size ``n = m`` with ``C = A = I``."""
    rows = []
    for idx, n in enumerate(sizes):
        inst = ProblemInstance.identity(int(n), lam)
        s_assign, s_null = derive_seed(seed, "runtime", idx, 0).spawn(2)
        assignment = sample_assignment(inst, s_assign, attempt_cap=SIM_ATTEMPT_CAP)
        profile = ground_truth_profile(inst, assignment)
        started = time.perf_counter()
        run_test(inst, assignment, profile, TestConfig(alpha=alpha, k=k, seed=int(s_null.generate_state(1)[0])))
        rows.append({"n": int(n), "seconds": time.perf_counter() - started})
    if len(rows) >= 2:
        slope = np.polyfit(np.log([r["n"] for r in rows]), np.log([max(r["seconds"], 1e-9) for r in rows]), 1)[0]
        log.info("runtime grows roughly as n^%.2f", slope)
    return rows


def runtime_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    started = time.perf_counter()
    rows = runtime_bench(cfg.sizes, cfg.k, cfg.seed, alpha=cfg.alpha)
    for r in rows:
        r["trials"] = 1
    return ExperimentReport(["n", "seconds", "trials"], rows, _metadata(cfg, started))


RUNNERS = {
    "power": power_experiment,
    "noisy_supervision": noisy_supervision_experiment,
    "false_alarm": false_alarm_experiment,
    "gain": gain_experiment,
    "runtime": runtime_experiment,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    cfg.validate()
    return RUNNERS[cfg.experiment](cfg, threads)


def fixed_strategies(mu: int) -> list[str]:
    """Every non-identity reordering of a truthful ranking of ``mu`` works."""
    return ["fixed:" + ",".join(str(p + 1) for p in perm)
            for perm in permutations(range(mu)) if list(perm) != list(range(mu))]
