"""Command-line entry point: ``surfelnav <command> [options]``.

Commands:

* ``gen-terrain``: write a synthetic terrain cloud (PCD/PLY).
* ``build``: cloud -> elevation volume JSON, optionally a cost-coloured cloud.
* ``colorize``: colour a cloud by the cost of a built volume.
* ``plan``: one start/goal query over a volume -> plan result JSON.
* ``bench``: random-problem benchmark over a volume or a built-in fixture.
* ``dump-config``: print the effective configuration file.

Data goes to files or stdout, diagnostics to stderr. Exit status is 0 on
success, 1 on a domain error (one-line message naming the error) and 2 on a
usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import config as cfgmod
from .bench import HILLS_FIXTURE, PIER_FIXTURE, generate_problems, rerun_from_manifest, run_benchmark
from .errors import SurfelNavError
from .planners import PlanningProblem, plan
from .pointcloud_io import colorize_by_cost, load_cloud, save_cloud
from .state_space import COST_WEIGHTED, UNIFORM_BOX, UNIFORM_VALID, ElevationState, ElevationStateSpace
from .surfel_map import ElevationVolume, build_volume
from .terrain import TERRAIN_KINDS, TerrainSpec, generate_terrain


class _UsageError(Exception):
    pass


def _floats(text: str, n: int, what: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        vals = []
    if len(vals) != n:
        raise _UsageError(f"{what} expects {n} comma-separated numbers, got {text!r}")
    return vals


def _load_config(args) -> cfgmod.Config:
    conf = cfgmod.load(args.config) if args.config else cfgmod.Config()
    pairs = [cfgmod.split_assignment(s) for s in args.set or []]
    return cfgmod.parse_assignments(pairs, conf)


def _emit(text: str, out: str | None) -> None:
    if out and out != "-":
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_volume(path: str) -> ElevationVolume:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SurfelNavError(f"cannot read volume {path}: {exc.strerror}") from None
    try:
        return ElevationVolume.from_json(text)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise SurfelNavError(f"{path} is not a volume document ({exc})") from None


def _space(volume: ElevationVolume, conf: cfgmod.Config) -> ElevationStateSpace:
    return ElevationStateSpace(volume, conf.model, conf.space)


# ------------------------------------------------------------------ commands

def cmd_dump_config(args, conf):
    _emit(conf.dumps(), args.output)


def cmd_gen_terrain(args, conf):
    extent = tuple(_floats(args.extent, 2, "--extent")) if args.extent else None
    if args.kind == "hills" and extent is None:
        spec = replace(HILLS_FIXTURE, seed=args.seed)
    elif args.kind == "pier-overlap" and extent is None:
        spec = replace(PIER_FIXTURE, seed=args.seed)
    else:
        spec = TerrainSpec(args.kind, extent=extent or (20.0, 20.0), seed=args.seed)
    changes = {k: getattr(args, k) for k in ("density", "noise", "jitter") if getattr(args, k) is not None}
    spec = replace(spec, **changes)
    save_cloud(generate_terrain(spec), args.output, args.format)


def cmd_build(args, conf):
    cloud = load_cloud(args.cloud)
    volume = build_volume(cloud, conf.map, conf.cost, conf.space.snap_radius or 0.0)
    _emit(volume.to_json(), args.output)
    if args.colorized:
        save_cloud(colorize_by_cost(cloud, volume), args.colorized)
    n = volume.size
    print(f"built {n} surfels, {len(volume.traversable_ids)} traversable", file=sys.stderr)


def cmd_colorize(args, conf):
    cloud = load_cloud(args.cloud)
    volume = _load_volume(args.volume)
    save_cloud(colorize_by_cost(cloud, volume), args.output)


def _resolve_state(space: ElevationStateSpace, pose: list[float], z: float | None) -> ElevationState:
    x, y, yaw = pose
    if z is None:
        _, z = space.snap_to_surface(x, y)
    else:
        _, z = space.snap_near(ElevationState(x, y, yaw, z), x, y)
    return ElevationState(x, y, yaw, z)


def cmd_plan(args, conf):
    start_pose = _floats(args.start, 3, "--start")
    goal_pose = _floats(args.goal, 3, "--goal")
    space = _space(_load_volume(args.volume), conf)
    start = _resolve_state(space, start_pose, args.start_z)
    goal = _resolve_state(space, goal_pose, args.goal_z)
    problem = PlanningProblem(start, goal, conf.plan.timeout, conf.plan.goal_tolerance_exact,
                              conf.plan.goal_tolerance_approx)
    result = plan(space, problem, conf.planner)
    _emit(result.to_json(timing=args.timing) + "\n", args.output)
    print(f"{result.status}: length {result.length:.3f} m, scoo {result.scoo:.1f}, "
          f"{result.iterations} iterations", file=sys.stderr)


def _bench_configs(conf: cfgmod.Config, compare: str):
    base = conf.planner
    if compare == "samplers":
        return [replace(base, sampler=s, name=None) for s in (UNIFORM_VALID, COST_WEIGHTED, UNIFORM_BOX)]
    if compare == "objectives":
        return [replace(base, objective=o, name=None) for o in ("length", "scoo")]
    if compare == "planners":
        return [replace(base, planner=p, name=None) for p in ("rrt-star", "prm-star")]
    return [base]


def cmd_bench(args, conf):
    if args.volume:
        volume = _load_volume(args.volume)
        digest = hashlib.sha256(Path(args.volume).read_bytes()).hexdigest()
        source = {"volume": Path(args.volume).name, "sha256": digest}
    else:
        spec = HILLS_FIXTURE if args.terrain == "hills" else (
            PIER_FIXTURE if args.terrain == "pier-overlap" else TerrainSpec(args.terrain, extent=(60.0, 60.0)))
        volume = build_volume(generate_terrain(spec), conf.map, conf.cost, conf.space.snap_radius or 0.0)
        source = {"terrain": args.terrain}
    space = _space(volume, conf)
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        report = rerun_from_manifest(space, manifest.get("manifest", manifest), jobs=args.jobs)
    else:
        b = conf.bench
        count = args.problems or b.problems
        problems = generate_problems(space, count, b.d_min, b.d_max, b.verify_timeout, b.seed,
                                     problem_timeout=b.timeout)
        configs = _bench_configs(conf, args.compare)
        report = run_benchmark(space, problems, configs, b.timeout, jobs=args.jobs,
                               manifest_extra={"source": source, "bench_seed": b.seed})
    _emit(report.to_json(timing=args.timing) + "\n", args.output)
    if args.csv:
        Path(args.csv).write_text(report.to_csv(timing=args.timing), encoding="utf-8")
    for label, s in report.summaries.items():
        print(f"{label}: exact {s.counts['exact']} approx {s.counts['approximate']} "
              f"failed {s.counts['failed']}", file=sys.stderr)


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration file (see dump-config)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")

    p = argparse.ArgumentParser(prog="surfelnav", description="Surfel-based terrain mapping and planning.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("dump-config", parents=[common], help="print the effective configuration")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_dump_config)

    s = sub.add_parser("gen-terrain", parents=[common], help="write a synthetic terrain cloud")
    s.add_argument("--kind", choices=TERRAIN_KINDS, default="flat")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--extent", help="W,H in metres")
    s.add_argument("--density", type=float, help="points per square metre")
    s.add_argument("--noise", type=float, help="z noise std-dev (m)")
    s.add_argument("--jitter", type=float, help="xy jitter as a fraction of grid spacing")
    s.add_argument("--format", choices=("auto", "pcd-ascii", "ply-ascii"), default="auto")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_gen_terrain)

    s = sub.add_parser("build", parents=[common], help="cloud -> elevation volume JSON")
    s.add_argument("cloud")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--colorized", help="also write the cost-coloured cloud here")
    s.set_defaults(func=cmd_build)

    s = sub.add_parser("colorize", parents=[common], help="colour a cloud by volume cost")
    s.add_argument("cloud")
    s.add_argument("volume")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_colorize)

    s = sub.add_parser("plan", parents=[common], help="plan one query over a volume")
    s.add_argument("volume")
    s.add_argument("--start", required=True, help="x,y,yaw")
    s.add_argument("--goal", required=True, help="x,y,yaw")
    s.add_argument("--start-z", type=float, help="pick the surface layer nearest this height")
    s.add_argument("--goal-z", type=float)
    s.add_argument("--timing", action="store_true", help="include wall-clock time in the output")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("bench", parents=[common], help="random-problem benchmark")
    src = s.add_mutually_exclusive_group()
    src.add_argument("--volume", help="volume JSON to benchmark on")
    src.add_argument("--terrain", choices=TERRAIN_KINDS, default="hills", help="built-in fixture")
    s.add_argument("--problems", type=int, help="override bench.problems")
    s.add_argument("--compare", choices=("none", "samplers", "objectives", "planners"), default="none")
    s.add_argument("--manifest", help="re-run the problems and configs of an earlier report")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--timing", action="store_true")
    s.add_argument("--csv", help="also write the summary table here")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_bench)
    return p


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(args, "jobs", 1) < 1:
            raise _UsageError("--jobs must be >= 1")
        conf = _load_config(args)
        args.func(args, conf)
    except _UsageError as exc:
        print(f"surfelnav: usage error: {exc}", file=sys.stderr)
        return 2
    except SurfelNavError as exc:
        print(f"surfelnav: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"surfelnav: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_cli())

