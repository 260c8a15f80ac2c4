"""Command-line front end: ``lipnav gen-env | simulate | bench``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import io as fio
from .environment import GenerationError, generate_environment
from .lip import LipParams
from .planner import PlannerConfig
from .sim import PLANNERS, SimConfig, run_benchmark, run_episode


def _load_config(path):
    if path is None:
        return PlannerConfig(), LipParams(), SimConfig()
    return fio.load_config(path)


def cmd_gen_env(args) -> int:
    if args.count < 0:
        raise ValueError("--count must be non-negative")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for seed in range(args.seed, args.seed + args.count):
        env = generate_environment(seed, args.obstacles)
        fio.save_environment(env, out / f"env_{seed:06d}.json")
    print(f"wrote {args.count} environment(s) to {out}")
    return 0


def cmd_simulate(args) -> int:
    env = fio.load_environment(args.env)
    cfg, params, sim = _load_config(args.config)
    if args.no_heading_cost:
        cfg = replace(cfg, r=0.0)
    if args.no_maneuverability:
        cfg = replace(cfg, maneuverability=False)
    log = run_episode(env, args.planner, cfg, params, sim)
    fio.save_trajectory(log, args.out)
    o = log.outcome
    print(
        f"planner={args.planner} finish={str(o.finish).lower()} violate={str(o.violate).lower()} "
        f"enter={str(o.enter).lower()} collide={str(o.collide).lower()} "
        f"steps={log.steps} termination={log.termination} samples={len(log.samples)}"
    )
    return 0


def cmd_bench(args) -> int:
    files = fio.environment_files(args.envs)
    envs = [fio.load_environment(f) for f in files]
    cfg, params, sim = _load_config(args.config)
    planners = PLANNERS if args.planner == "both" else (args.planner,)
    table = run_benchmark(envs, planners, cfg, params, sim, jobs=args.jobs)
    fio.save_report(table, args.out, fio.config_to_dict(cfg, params, sim), [f.name for f in files])
    for p in planners:
        c = table.counts(p)
        print(
            f"{p}: finish={c['finish']} violate={c['violate']} enter={c['enter']} "
            f"collide={c['collide']} episodes={c['episodes']}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lipnav", description="LIP-MPC footstep navigation and benchmarking.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-env", help="write seeded random environments as JSON")
    g.add_argument("--seed", type=int, default=0, help="first seed (default 0)")
    g.add_argument("--count", type=int, default=20, help="number of environments (default 20)")
    g.add_argument("--obstacles", type=int, default=8, help="obstacles per environment (default 8)")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen_env)

    s = sub.add_parser("simulate", help="run one closed-loop episode and write its trajectory CSV")
    s.add_argument("--env", required=True, help="environment JSON file")
    s.add_argument("--planner", choices=PLANNERS, default="lip")
    s.add_argument("--config", help="config JSON file (defaults when omitted)")
    s.add_argument("--out", required=True, help="trajectory CSV path")
    s.add_argument("--no-heading-cost", action="store_true", help="set the heading weight r to 0")
    s.add_argument("--no-maneuverability", action="store_true", help="drop the turn/speed coupling rows")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bench", help="run planners over a directory of environments")
    b.add_argument("--envs", required=True, help="directory of environment JSON files")
    b.add_argument("--planner", choices=PLANNERS + ("both",), default="both")
    b.add_argument("--config", help="config JSON file (defaults when omitted)")
    b.add_argument("--out", required=True, help="report JSON path")
    b.add_argument("--jobs", type=int, default=1, help="parallel episodes (default 1)")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (fio.FormatError, GenerationError, OSError, ValueError) as exc:
        print(f"lipnav {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
