"""Command-line front end.

Subcommands:
  plan     solve one query and write the plan + verification report
  bench    run a benchmark matrix and write a CSV report
  export   emit CSV point clouds (footsteps, com, surfaces, trajectory)
  scene    generate and save a scene file

Exit codes: 0 success, 1 input/usage error, 2 planning failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench import BenchConfig, run_benchmark
from .errors import FootplanError, PlanningFailed
from .guide import GuideConfig, rrt_plan, state_from_pose, trajectory_csv
from .pipeline import PlanQuery, plan_footsteps, save_plan, verify_plan
from .scenario import (SceneSpec, generate_scene, load_robot, load_scene,
                       named_robot, named_scene, save_scene)

_METHOD_FLAGS = {"mip-opt": "MIP_OPT", "mip-feas": "MIP_FEAS",
                 "sl1m": "SL1M", "sl1m-rw": "SL1M_REWEIGHTED"}


def _load_scene_arg(token: str):
    path = Path(token)
    looks_like_path = path.suffix == ".json" or "/" in token
    if path.exists():
        scene, start, goal = load_scene(path.read_text())
        if start is None or goal is None:
            raise FootplanError(f"scene file '{token}' lacks start/goal poses")
        return scene, start, goal
    if looks_like_path:
        raise FootplanError(f"scene not found: {token}")
    return named_scene(token)


def _load_robot_arg(token: str):
    path = Path(token)
    if path.exists():
        return load_robot(path.read_text())
    return named_robot(token)


def cmd_plan(args) -> int:
    try:
        scene, start, goal = _load_scene_arg(args.scene)
        model = _load_robot_arg(args.robot)
    except FileNotFoundError:
        print(f"error: scene not found: {args.scene}", file=sys.stderr)
        return 1
    except FootplanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    query = PlanQuery(scene, model, start, goal,
                      method=_METHOD_FLAGS[args.method], pruning=args.prune,
                      dt=args.dt, seed=args.seed, big_m=args.big_m,
                      max_trials=args.max_trials,
                      presolve=args.presolve == "on")
    try:
        plan = plan_footsteps(query)
    except PlanningFailed as exc:
        print(f"planning failed: stage={exc.stage} cause={exc.cause}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.write_text(save_plan(plan))
    report = verify_plan(plan, scene, model)
    out.with_suffix(".verify.txt").write_text(report.summary() + "\n")
    print(f"plan written to {out} ({len(plan.steps)} steps, cost {plan.cost:.6f})")
    return 0


def cmd_bench(args) -> int:
    config = BenchConfig(
        scenarios=tuple(args.scenes.split(",")),
        methods=tuple(_METHOD_FLAGS[m] for m in args.methods.split(",")),
        pruning=tuple(args.prune.split(",")),
        runs=args.runs, seed=args.seed, dt=args.dt, robot=args.robot,
        presolve=args.presolve == "on", workers=args.workers)
    report = run_benchmark(config)
    Path(args.out).write_text(report.to_csv())
    for cell in report.cells:
        print(f"{cell.scenario:>16} {cell.method:>16} {cell.pruning:>10} "
              f"success={cell.successes}/{cell.runs} "
              f"solve={cell.solve_ms_mean:9.1f}ms status={cell.status}")
    return 0


def _write_csv(path: Path, header: str, rows) -> None:
    lines = [header] + [",".join(f"{v:.9g}" if isinstance(v, float) else str(v)
                                 for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def cmd_export(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.what in ("footsteps", "com"):
        try:
            doc = json.loads(Path(args.plan).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read plan: {exc}", file=sys.stderr)
            return 1
        if args.what == "footsteps":
            rows = [(s["index"], s["effector"], s["surface"],
                     float(s["position"][0]), float(s["position"][1]),
                     float(s["position"][2]), float(s["yaw"]))
                    for s in doc["steps"]]
            _write_csv(outdir / "footsteps.csv",
                       "index,effector,surface,x,y,z,yaw", rows)
        else:
            rows = []
            for i, (a, b) in enumerate(doc["com"]):
                rows.append((i, 0, float(a[0]), float(a[1]), float(a[2])))
                rows.append((i, 1, float(b[0]), float(b[1]), float(b[2])))
            _write_csv(outdir / "com.csv", "phase,point,x,y,z", rows)
    elif args.what == "surfaces":
        try:
            scene, *_ = _load_scene_arg(args.scene)
        except FootplanError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        rows = []
        for s in scene.surfaces:
            for k, v in enumerate(s.vertices):
                rows.append((s.id, k, float(v[0]), float(v[1]), float(v[2])))
        _write_csv(outdir / "surfaces.csv", "surface,vertex,x,y,z", rows)
    elif args.what == "trajectory":
        try:
            scene, start, goal = _load_scene_arg(args.scene)
            model = _load_robot_arg(args.robot)
        except FootplanError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        try:
            traj = rrt_plan(state_from_pose(scene, model, start),
                            state_from_pose(scene, model, goal), scene, model,
                            GuideConfig(seed=args.seed))
        except FootplanError as exc:
            print(f"planning failed: {exc}", file=sys.stderr)
            return 2
        (outdir / "trajectory.csv").write_text(trajectory_csv(traj))
    print(f"export written to {outdir}")
    return 0


def cmd_scene(args) -> int:
    try:
        if args.kind == "named":
            scene, start, goal = named_scene(args.name)
        else:
            scene, start, goal = generate_scene(SceneSpec(
                kind=args.kind, count=args.count, rise=args.rise, run=args.run,
                tilt=args.tilt, seed=args.seed))
    except FootplanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    Path(args.out).write_text(save_scene(scene, start, goal))
    print(f"scene '{scene.name}' ({scene.m} surfaces) written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="footplan",
                                     description="Footstep planning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan footsteps for one query")
    p.add_argument("--scene", required=True,
                   help="scene file or shorthand (stairs7, bridge, rubbles12, ...)")
    p.add_argument("--robot", default="biped", help="robot file or biped/quadruped")
    p.add_argument("--method", choices=sorted(_METHOD_FLAGS), default="sl1m")
    p.add_argument("--prune", choices=("trajectory", "none"), default="trajectory")
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--big-m", dest="big_m", type=float, default=100.0)
    p.add_argument("--max-trials", dest="max_trials", type=int, default=4000)
    p.add_argument("--presolve", choices=("on", "off"), default="on")
    p.add_argument("--out", default="plan.json")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bench", help="run a benchmark matrix")
    p.add_argument("--scenes", default="bridge,stairs7")
    p.add_argument("--methods", default="mip-opt,mip-feas,sl1m")
    p.add_argument("--prune", default="trajectory")
    p.add_argument("--robot", default="biped")
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--presolve", choices=("on", "off"), default="on")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="bench.csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("export", help="emit CSV artifacts")
    p.add_argument("--what", choices=("footsteps", "com", "surfaces", "trajectory"),
                   required=True)
    p.add_argument("--plan", help="plan file (footsteps/com)")
    p.add_argument("--scene", help="scene file or shorthand (surfaces/trajectory)")
    p.add_argument("--robot", default="biped")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default="export")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("scene", help="generate a scene file")
    p.add_argument("--kind", choices=("stairs", "rubbles", "bridge",
                                      "rubbles_stairs", "named"), default="named")
    p.add_argument("--name", default="stairs7", help="shorthand when --kind named")
    p.add_argument("--count", type=int, default=7)
    p.add_argument("--rise", type=float, default=0.1)
    p.add_argument("--run", type=float, default=0.3)
    p.add_argument("--tilt", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default="scene.json")
    p.set_defaults(func=cmd_scene)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
