"""Command-line front end: ``peertest {test,simulate,generate,presets,bench}``.

Exit codes: 0 ok, 2 validation error, 3 infeasible or sampling budget
exhausted, 4 configuration error.  Errors are printed to stderr as one JSON
object carrying a stable ``error`` code.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, errors
from .assign import ATTEMPT_CAP, sample_assignment, sample_assignment_on_topology
from .core import ReviewProfile
from .detect import GROUND_TRUTH, NONE, TestConfig, result_summary, run_test
from .io import DatasetBundle, Ids, load_bundle, load_bundle_dir, profile_from_text, topology_from_text, write_bundle
from .sim import (EXPERIMENTS, INSTANCE_PRESETS, ExperimentConfig, assign_strategies, derive_seed,
                  impartial_profile, instance_preset, reviewer_noise, run_experiment, runtime_bench, simulate_profile)
from .strategy import MIX_PRESETS, StrategyKind, mix_preset

log = logging.getLogger("peertest")


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    sys.stdout.write(text)
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(text.encode())


# -- test ------------------------------------------------------------------------------------

def _load_inputs(args) -> tuple[DatasetBundle, dict]:
    if args.bundle:
        bundle = load_bundle_dir(args.bundle)
        inputs = {"bundle": args.bundle}
    else:
        missing = [f for f in ("instance", "assignment", "profile") if getattr(args, f) is None]
        if missing:
            raise errors.ConfigError(f"either --bundle or all of --instance/--assignment/--profile (missing {missing})")
        bundle = load_bundle(args.instance, args.assignment, args.profile)
        inputs = {"instance": args.instance, "assignment": args.assignment, "profile": args.profile}
    return bundle, inputs


def _supervision(flag: str, bundle: DatasetBundle):
    if flag in (NONE, GROUND_TRUTH):
        return flag
    if flag.startswith("file:"):
        text = Path(flag[5:]).read_text()
        try:
            return profile_from_text(text, bundle.assignment, bundle.ids)
        except errors.ValidationError as exc:
            raise errors.SupervisionAssignmentMismatch(str(exc), **exc.details) from exc
    raise errors.InvalidTestConfig(f"--supervision must be none, ground-truth or file:PATH, got {flag!r}")


def cmd_test(args) -> int:
    bundle, inputs = _load_inputs(args)
    supervision = _supervision(args.supervision, bundle)
    config = TestConfig(alpha=args.alpha, k=args.k, supervision=supervision, seed=args.seed)
    result = run_test(bundle.instance, bundle.assignment, bundle.profile, config)
    doc = {
        "tool": "peertest",
        "version": __version__,
        "config": {"alpha": args.alpha, "k": args.k, "supervision": args.supervision, "seed": args.seed,
                   "inputs": inputs},
        "result": result_summary(result),
    }
    _emit(_dump(doc), args.out)
    return 0


# -- simulate --------------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    try:
        doc = json.loads(Path(args.config).read_text())
    except (OSError, ValueError) as exc:
        raise errors.ConfigError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(doc, dict):
        raise errors.ConfigError("config must be a JSON object")
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.trials is not None:
        doc["trials"] = args.trials
    cfg = ExperimentConfig.from_dict(doc)
    report = run_experiment(cfg, threads=args.threads)
    csv_path, meta_path = report.write(args.out, include_timing=args.timing)
    sys.stdout.write(_dump({"csv": csv_path, "metadata": meta_path, "rows": len(report.rows)}))
    return 0


# -- generate --------------------------------------------------------------------------------

def cmd_generate(args) -> int:
    inst = instance_preset(args.preset)
    mix = mix_preset(args.mix)
    if not 0 <= args.truthful_fraction <= 1:
        raise errors.InvalidGrid("--truthful-fraction must lie in [0, 1]")
    s_assign, s_kinds, s_noise, s_imp = derive_seed(args.seed, "generate", 0).spawn(4)
    if args.topology:
        topology = topology_from_text(Path(args.topology).read_text(), inst.m, inst.n)
        assignment = sample_assignment_on_topology(inst, topology, s_assign, attempt_cap=args.attempt_cap)
    else:
        assignment = sample_assignment(inst, s_assign, attempt_cap=args.attempt_cap)
    kinds = assign_strategies(mix, args.truthful_fraction, inst.m, s_kinds)
    profile = simulate_profile(inst, assignment, kinds, reviewer_noise(inst, None, args.sigma), s_noise)
    impartial: ReviewProfile | None = None
    if args.impartial_sigma is not None:
        impartial = impartial_profile(inst, assignment, args.impartial_sigma, s_imp)
    ids = Ids.default(inst.m, inst.n)
    written = write_bundle(args.out, DatasetBundle(inst, ids, assignment, profile, impartial))
    counts = {k.value: kinds.count(k) for k in StrategyKind if kinds.count(k)}
    sys.stdout.write(_dump({"tool": "peertest", "version": __version__, "files": written, "strategies": counts,
                            "config": {"preset": args.preset, "mix": args.mix, "sigma": args.sigma,
                                       "truthful_fraction": args.truthful_fraction, "seed": args.seed,
                                       "impartial_sigma": args.impartial_sigma, "topology": args.topology}}))
    return 0


# -- presets / bench -------------------------------------------------------------------------

def cmd_presets(args) -> int:
    mixes = {}
    for name in MIX_PRESETS:
        mixes[name] = {k.value: round(v, 6) for k, v in mix_preset(name).weights.items()}
    instances = {}
    for name in INSTANCE_PRESETS:
        inst = instance_preset(name)
        instances[name] = {"n": inst.n, "m": inst.m, "lambda": inst.lam, "mu": inst.mu}
    sys.stdout.write(_dump({"instances": instances, "mixes": mixes, "strategies": [k.value for k in StrategyKind],
                            "experiments": list(EXPERIMENTS)}))
    return 0


def cmd_bench(args) -> int:
    rows = runtime_bench(args.sizes, k=args.k, seed=args.seed)
    _emit(_dump({"tool": "peertest", "version": __version__, "k": args.k, "seed": args.seed, "runs": rows}), args.out)
    return 0


# -- entry point -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="peertest", description="Test peer rankings for strategic manipulation.")
    p.add_argument("--version", action="version", version=f"peertest {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run the test on ranking data")
    t.add_argument("--bundle", help="directory with instance.json, assignment.txt, profile.txt")
    t.add_argument("--instance")
    t.add_argument("--assignment")
    t.add_argument("--profile")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--k", type=int, default=100, help="null samples (0 = enumerate)")
    t.add_argument("--supervision", default=NONE, help="none, ground-truth or file:PATH")
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--threads", type=int, default=1)
    t.add_argument("--out")
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="run an experiment from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="CSV path; metadata goes next to it as .meta.json")
    s.add_argument("--seed", type=int)
    s.add_argument("--trials", type=int)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--timing", action="store_true", help="record wall time in the metadata sidecar")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("generate", help="write a synthetic dataset bundle")
    g.add_argument("--preset", default="game20")
    g.add_argument("--mix", default="truthful", help="mix preset or strategy name")
    g.add_argument("--truthful-fraction", type=float, default=0.0)
    g.add_argument("--sigma", type=float, default=0.0, help="reviewer perception noise")
    g.add_argument("--impartial-sigma", type=float, help="also write impartial.txt with this noise")
    g.add_argument("--topology", help="edge list fixing the assignment graph structure")
    g.add_argument("--attempt-cap", type=int, default=ATTEMPT_CAP, help="rejection-sampling budget")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    pr = sub.add_parser("presets", help="list instance and strategy-mix presets")
    pr.set_defaults(func=cmd_presets)

    b = sub.add_parser("bench", help="time one test run per instance size")
    b.add_argument("--sizes", type=int, nargs="+", default=[20, 50, 100, 200])
    b.add_argument("--k", type=int, default=100)
    b.add_argument("--seed", type=int, required=True)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "threads", 1) < 1:
        args.threads = 1
    try:
        return args.func(args)
    except errors.PeerTestError as exc:
        sys.stderr.write(json.dumps(exc.to_dict(), default=_jsonable) + "\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "IOError", "exit_code": 4, "message": str(exc)}) + "\n")
        return 4


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    return str(v)


if __name__ == "__main__":
    sys.exit(main())
