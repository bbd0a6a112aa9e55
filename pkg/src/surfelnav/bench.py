"""Random-problem benchmark: solvable problem generation and success-rate reports."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import EmptyConfigList, InvalidConfig, UnsatisfiableSpec
from .planners import (
    APPROXIMATE,
    EXACT,
    FAILED,
    PRM_STAR,
    PlannerConfig,
    PlanningProblem,
    PlanResult,
    classify_gap,
    goal_gap,
    plan,
)
from .state_space import COST_WEIGHTED, UNIFORM_VALID, ElevationState, ElevationStateSpace
from .terrain import TerrainSpec

REFERENCE_PLANNER = PlannerConfig(planner=PRM_STAR, sampler=COST_WEIGHTED, stop_on_first=True)

# 60 x 60 m of bumps; about a quarter of the surfels come out non-traversable
# under the default cost ranges
HILLS_FIXTURE = TerrainSpec("hills", extent=(60.0, 60.0), noise=0.02, hill_amplitude=5.0,
                            hill_count=24, seed=1)
# lower layer, deck, and a goal under the deck
PIER_FIXTURE = TerrainSpec("pier-overlap", extent=(30.0, 20.0), seed=0)


def traversable_components(space: ElevationStateSpace) -> np.ndarray:
    """Component label per surfel of the graph linking nearby traversable surfels.

    Two traversable surfels are linked when they are within the snap radius
    horizontally and their tangent planes meet within ``z_step_max``
    halfway between them. Used
    to avoid drawing start/goal pairs that cannot possibly be connected;
    non-traversable surfels get label -1.
    """
    vol = space.volume
    ids = vol.traversable_ids
    labels = np.full(vol.size, -1)
    if len(ids) == 0:
        return labels
    pos = vol.positions[ids]
    pairs = cKDTree(pos[:, :2]).query_pairs(space.snap_radius, output_type="ndarray")
    if len(pairs):
        # compare the two tangent planes halfway between the surfels
        mid = 0.5 * (pos[pairs[:, 0], :2] + pos[pairs[:, 1], :2])
        za = space.heights_at(ids[pairs[:, 0]], mid)
        zb = space.heights_at(ids[pairs[:, 1]], mid)
        pairs = pairs[np.abs(za - zb) <= space.params.z_step_max]
    m = len(ids)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m)) if len(pairs) \
        else coo_matrix((m, m))
    _, comp = connected_components(graph, directed=False)
    labels[ids] = comp
    return labels


def generate_problems(space: ElevationStateSpace, count: int, d_min: float, d_max: float,
                      verify_timeout: float = 30.0, seed: int = 0,
                      reference: PlannerConfig | None = None, max_attempts: int | None = None,
                      problem_timeout: float = 10.0) -> list[PlanningProblem]:
    """``count`` start/goal pairs, each at distance in ``[d_min, d_max]`` and verified solvable.

    A pair is kept only when the reference planner (PRM* with cost-weighted
    surfel sampling by default) finds an exact solution within
    ``verify_timeout``; otherwise it is discarded and another pair drawn.
    """
    if count < 0:
        raise InvalidConfig("count must be non-negative")
    if not 0 <= d_min < d_max:
        raise InvalidConfig("need 0 <= d_min < d_max")
    if count == 0:
        return []
    vol = space.volume
    ids = vol.traversable_ids
    pos = vol.positions[ids]
    span = float(np.linalg.norm(pos.max(axis=0) - pos.min(axis=0))) if len(ids) else 0.0
    if span < d_min:
        raise UnsatisfiableSpec(f"traversable region spans {span:.1f} m < d_min {d_min} m")
    labels = traversable_components(space)[ids]
    reference = reference or REFERENCE_PLANNER
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x9E4]))
    max_attempts = max_attempts or 200 * count
    problems: list[PlanningProblem] = []
    draws = 0
    while len(problems) < count:
        if draws >= max_attempts:
            raise UnsatisfiableSpec(
                f"only {len(problems)} of {count} problems found after {draws} draws")
        draws += 1
        i = int(rng.integers(len(ids)))
        d = np.linalg.norm(pos - pos[i], axis=1)
        ok = np.flatnonzero((d >= d_min) & (d <= d_max) & (labels == labels[i]))
        yaw_s, yaw_g = np.pi - 2 * np.pi * rng.random(2)
        if len(ok) == 0:
            continue
        j = int(ok[rng.integers(len(ok))])
        start = ElevationState(*pos[i][:2].tolist(), float(yaw_s), float(pos[i][2]))
        goal = ElevationState(*pos[j][:2].tolist(), float(yaw_g), float(pos[j][2]))
        verify = PlanningProblem(start, goal, timeout=verify_timeout)
        result = plan(space, verify, replace(reference, seed=int(rng.integers(2**31))))
        if result.status != EXACT:
            continue
        problems.append(PlanningProblem(start, goal, timeout=problem_timeout))
    return problems


def path_violations(space: ElevationStateSpace, problem: PlanningProblem, result: PlanResult) -> list[str]:
    """Soundness problems with a returned path (empty list means sound).

    Checks per-state validity, per-segment motion validity, and that the
    reported status matches the terminal gap class.
    """
    issues = []
    if result.status == FAILED:
        return issues if not result.path else ["failed result carries a path"]
    if not result.path:
        return ["non-failed result has an empty path"]
    for k, s in enumerate(result.path):
        if not space.is_state_valid(s):
            issues.append(f"state {k} invalid")
    for k, (a, b) in enumerate(zip(result.path[:-1], result.path[1:])):
        if not space.is_motion_valid(a, b):
            issues.append(f"segment {k} invalid")
    gap = goal_gap(result.path[-1], problem.goal)
    expected = classify_gap(gap, problem.goal_tolerance_exact, problem.goal_tolerance_approx)
    if expected != result.status:
        issues.append(f"status {result.status} but gap {gap:.3f} m is {expected}")
    return issues


@dataclass
class RunRecord:
    problem: int
    config: str
    status: str
    gap: float
    length: float
    scoo: float
    iterations: int
    wall_time: float
    sound: bool
    violations: list[str] = field(default_factory=list)
    path: list[ElevationState] | None = None

    def to_dict(self, timing: bool = True) -> dict:
        return {
            "problem": self.problem,
            "config": self.config,
            "status": self.status,
            "gap": self.gap if math.isfinite(self.gap) else None,
            "length": self.length,
            "scoo": self.scoo,
            "iterations": self.iterations,
            "wall_time": self.wall_time if timing else None,
            "sound": self.sound,
            "violations": self.violations,
        }


@dataclass
class ConfigSummary:
    label: str
    counts: dict[str, int]
    success_rate: float
    approximate_rate: float
    mean_length: float
    mean_scoo: float
    mean_wall_time: float

    def to_dict(self, timing: bool = True) -> dict:
        d = dict(self.__dict__)
        if not timing:
            d["mean_wall_time"] = None
        for k in ("mean_length", "mean_scoo", "mean_wall_time"):
            if isinstance(d[k], float) and not math.isfinite(d[k]):
                d[k] = None
        return d


@dataclass
class BenchmarkReport:
    summaries: dict[str, ConfigSummary]
    runs: list[RunRecord]
    manifest: dict

    def summary(self, label: str) -> ConfigSummary:
        return self.summaries[label]

    def to_dict(self, timing: bool = True) -> dict:
        return {
            "format": "surfelnav.bench/1",
            "summaries": {k: v.to_dict(timing) for k, v in sorted(self.summaries.items())},
            "runs": [r.to_dict(timing) for r in self.runs],
            "manifest": self.manifest,
        }

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=1, sort_keys=True)

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["config", "problems", "exact", "approximate", "failed", "success_rate",
                    "approximate_rate", "mean_length", "mean_scoo", "mean_wall_time"])
        for label, s in sorted(self.summaries.items()):
            w.writerow([label, sum(s.counts.values()), s.counts[EXACT], s.counts[APPROXIMATE],
                        s.counts[FAILED], f"{s.success_rate:.4f}", f"{s.approximate_rate:.4f}",
                        f"{s.mean_length:.4f}", f"{s.mean_scoo:.4f}",
                        f"{s.mean_wall_time:.4f}" if timing else ""])
        return buf.getvalue()


def _run_one(args):
    space, problem, config, index = args
    cfg = replace(config, seed=int(np.random.SeedSequence([config.seed, index]).generate_state(1)[0]))
    result = plan(space, problem, cfg)
    gap = goal_gap(result.path[-1], problem.goal) if result.path else result.goal_gap
    violations = path_violations(space, problem, result)
    return result, gap, violations


def _summarise(label: str, records: list[RunRecord]) -> ConfigSummary:
    counts = {EXACT: 0, APPROXIMATE: 0, FAILED: 0}
    for r in records:
        counts[r.status] += 1
    n = len(records)
    solved = [r for r in records if r.status == EXACT]
    return ConfigSummary(
        label=label,
        counts=counts,
        success_rate=counts[EXACT] / n,
        approximate_rate=counts[APPROXIMATE] / n,
        mean_length=float(np.mean([r.length for r in solved])) if solved else math.nan,
        mean_scoo=float(np.mean([r.scoo for r in solved])) if solved else math.nan,
        mean_wall_time=float(np.mean([r.wall_time for r in records])),
    )


def run_benchmark(space: ElevationStateSpace, problems: list[PlanningProblem],
                  configs: list[PlannerConfig], per_query_timeout: float | None = None,
                  jobs: int = 1, keep_paths: bool = False,
                  manifest_extra: dict | None = None) -> BenchmarkReport:
    """Run every (problem, config) pair and tally exact / approximate / failed.

    Status is taken from the terminal gap (< 0.2 m exact, < 10 m
    approximate by default tolerances), not from the planner's own label.
    Each run gets a seed derived from the config seed and problem index, so
    a report is reproducible from its manifest when iteration budgets bind.
    """
    if not configs:
        raise EmptyConfigList("need at least one planner config")
    if not problems:
        raise InvalidConfig("need at least one problem")
    labels = [c.label for c in configs]
    if len(set(labels)) != len(labels):
        raise InvalidConfig("planner config labels must be unique")
    if per_query_timeout is not None:
        problems = [replace(p, timeout=per_query_timeout) for p in problems]
    tasks = [(space, p, c, i) for c in configs for i, p in enumerate(problems)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_run_one, tasks))
    else:
        outputs = [_run_one(t) for t in tasks]

    runs = []
    for (_, problem, config, index), (result, gap, violations) in zip(tasks, outputs):
        status = classify_gap(gap, problem.goal_tolerance_exact, problem.goal_tolerance_approx) \
            if result.path else FAILED
        runs.append(RunRecord(
            problem=index, config=config.label, status=status, gap=gap,
            length=result.length, scoo=result.scoo, iterations=result.iterations,
            wall_time=result.wall_time, sound=not violations, violations=violations,
            path=result.path if keep_paths else None,
        ))
    runs.sort(key=lambda r: (labels.index(r.config), r.problem))
    summaries = {lab: _summarise(lab, [r for r in runs if r.config == lab]) for lab in labels}
    manifest = {
        "problems": [p.to_dict() for p in problems],
        "configs": [c.to_dict() for c in configs],
        "per_query_timeout": per_query_timeout,
    }
    if manifest_extra:
        manifest.update(manifest_extra)
    return BenchmarkReport(summaries, runs, manifest)


def rerun_from_manifest(space: ElevationStateSpace, manifest: dict, jobs: int = 1) -> BenchmarkReport:
    problems = [PlanningProblem.from_dict(p) for p in manifest["problems"]]
    configs = [PlannerConfig(**c) for c in manifest["configs"]]
    extra = {k: v for k, v in manifest.items() if k not in ("problems", "configs", "per_query_timeout")}
    return run_benchmark(space, problems, configs, manifest["per_query_timeout"], jobs=jobs,
                         manifest_extra=extra)


def sampler_pair(base: PlannerConfig) -> list[PlannerConfig]:
    """The same planner with uniform-valid and cost-weighted surfel sampling."""
    return [replace(base, sampler=UNIFORM_VALID, name=None), replace(base, sampler=COST_WEIGHTED, name=None)]
