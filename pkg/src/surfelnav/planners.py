"""RRT* and PRM* over the elevation state space.

Both planners draw samples from a :class:`SurfelSampler`, validate every
edge by chain-snapping a dense discretisation onto the surfel layer, and
optimise one of three objectives:

* ``length``: model distance along the motion (planar/Dubins length, yaw
  term, weighted height variation);
* ``scoo``: arc-length integral of surfel cost;
* ``blend``: ``alpha * length + (1 - alpha) * scoo / max_cost``.

Termination is by wall-clock ``problem.timeout`` and optionally by an
iteration budget; with a budget that is reached first the result is fully
deterministic for a given seed.
"""

from __future__ import annotations

import heapq
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dubins import dubins_shortest_path
from .errors import InvalidConfig, InvalidStartOrGoal
from .state_space import (
    COST_WEIGHTED,
    DUBINS,
    SAMPLER_MODES,
    UNIFORM_BOX,
    ElevationState,
    ElevationStateSpace,
    MotionTrace,
    SamplerConfig,
)

RRT_STAR = "rrt-star"
PRM_STAR = "prm-star"
OBJECTIVES = ("length", "scoo", "blend")

EXACT = "exact"
APPROXIMATE = "approximate"
FAILED = "failed"


@dataclass(frozen=True)
class PlanningProblem:
    start: ElevationState
    goal: ElevationState
    timeout: float = 10.0
    goal_tolerance_exact: float = 0.2
    goal_tolerance_approx: float = 10.0

    def __post_init__(self):
        if not self.goal_tolerance_exact < self.goal_tolerance_approx:
            raise InvalidConfig("exact goal tolerance must be below the approximate one")
        if not self.timeout > 0:
            raise InvalidConfig("timeout must be positive")

    def to_dict(self) -> dict:
        return {
            "start": self.start.to_dict(),
            "goal": self.goal.to_dict(),
            "timeout": self.timeout,
            "goal_tolerance_exact": self.goal_tolerance_exact,
            "goal_tolerance_approx": self.goal_tolerance_approx,
        }

    @classmethod
    def from_dict(cls, d: dict) -> PlanningProblem:
        return cls(
            start=ElevationState(**d["start"]),
            goal=ElevationState(**d["goal"]),
            timeout=d["timeout"],
            goal_tolerance_exact=d["goal_tolerance_exact"],
            goal_tolerance_approx=d["goal_tolerance_approx"],
        )


@dataclass(frozen=True)
class PlannerConfig:
    planner: str = PRM_STAR
    objective: str = "length"
    blend_alpha: float = 0.5
    sampler: str = COST_WEIGHTED
    goal_bias: float = 0.05
    gamma: float = 2.0 * math.e
    max_neighbors: int = 15
    range: float | None = None  # RRT* extension length; None = 8 voxels
    batch_size: int = 50  # PRM* samples between graph searches
    max_iterations: int | None = None
    stop_on_first: bool = False
    seed: int = 0
    name: str | None = None

    def __post_init__(self):
        if self.planner not in (RRT_STAR, PRM_STAR):
            raise InvalidConfig(f"unknown planner {self.planner!r}")
        if self.objective not in OBJECTIVES:
            raise InvalidConfig(f"unknown objective {self.objective!r}")
        if self.sampler not in SAMPLER_MODES:
            raise InvalidConfig(f"unknown sampler {self.sampler!r}")
        if not 0.0 <= self.goal_bias < 1.0:
            raise InvalidConfig("goal_bias must be in [0, 1)")
        if not self.gamma > 0:
            raise InvalidConfig("gamma must be positive")
        if not 0.0 <= self.blend_alpha <= 1.0:
            raise InvalidConfig("blend_alpha must be in [0, 1]")
        if self.max_neighbors < 1 or self.batch_size < 1:
            raise InvalidConfig("max_neighbors and batch_size must be >= 1")
        if self.range is not None and not self.range > 0:
            raise InvalidConfig("range must be positive")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        obj = self.objective if self.objective != "blend" else f"blend{self.blend_alpha:g}"
        return f"{self.planner}/{self.sampler}/{obj}"

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class PlanResult:
    status: str
    path: list[ElevationState]
    length: float
    scoo: float
    iterations: int
    wall_time: float
    goal_gap: float = math.inf
    waypoints: list[ElevationState] = field(default_factory=list)
    cost_history: list[tuple[int, float]] = field(default_factory=list)
    objective: str = "length"

    def to_dict(self, timing: bool = True) -> dict:
        return {
            "status": self.status,
            "objective": self.objective,
            "length": self.length,
            "scoo": self.scoo,
            "goal_gap": self.goal_gap if math.isfinite(self.goal_gap) else None,
            "iterations": self.iterations,
            "wall_time": self.wall_time if timing else None,
            "path": [s.to_dict() for s in self.path],
            "waypoints": [s.to_dict() for s in self.waypoints],
        }

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> PlanResult:
        return cls(
            status=d["status"],
            path=[ElevationState(**s) for s in d["path"]],
            length=d["length"],
            scoo=d["scoo"],
            iterations=d["iterations"],
            wall_time=d["wall_time"] if d["wall_time"] is not None else math.nan,
            goal_gap=d["goal_gap"] if d["goal_gap"] is not None else math.inf,
            waypoints=[ElevationState(**s) for s in d.get("waypoints", [])],
            objective=d.get("objective", "length"),
        )


def goal_gap(state, goal: ElevationState) -> float:
    s = state if isinstance(state, ElevationState) else ElevationState(*state)
    return math.sqrt((s.x - goal.x) ** 2 + (s.y - goal.y) ** 2 + (s.z - goal.z) ** 2)


def classify_gap(gap: float, exact_tol: float = 0.2, approx_tol: float = 10.0) -> str:
    """Result class from the terminal gap: < exact_tol exact, < approx_tol approximate."""
    if gap < exact_tol:
        return EXACT
    if gap < approx_tol:
        return APPROXIMATE
    return FAILED


class _Objective:
    def __init__(self, space: ElevationStateSpace, config: PlannerConfig):
        self.space = space
        self.kind = config.objective
        self.alpha = config.blend_alpha
        self.max_cost = space.volume.max_cost

    def edge(self, tr: MotionTrace) -> float:
        if self.kind == "length":
            return self.space.trace_length_cost(tr)
        if self.kind == "scoo":
            return self.space.trace_scoo(tr)
        return (self.alpha * self.space.trace_length_cost(tr)
                + (1.0 - self.alpha) * self.space.trace_scoo(tr) / self.max_cost)

    def lower_bound(self, model_distance):
        """Admissible bound on the edge cost from the model distance (0 when unknown)."""
        if self.kind == "length":
            return model_distance
        if self.kind == "blend":
            return self.alpha * model_distance
        return 0.0 * model_distance


def _check_endpoints(space: ElevationStateSpace, problem: PlanningProblem) -> None:
    if not space.is_state_valid(problem.start):
        raise InvalidStartOrGoal(f"start state {problem.start} is not valid")
    if not space.is_state_valid(problem.goal):
        raise InvalidStartOrGoal(f"goal state {problem.goal} is not valid")


def _neighbour_count(config: PlannerConfig, n: int) -> int:
    return max(1, min(config.max_neighbors, math.ceil(config.gamma * math.log(max(n, 2)))))


def _finish(space, problem, config, status, waypoints, traces, iterations, t0, history):
    path: list[ElevationState] = []
    for k, tr in enumerate(traces):
        states = tr.to_states()
        path.extend(states if k == 0 else states[1:])
    if not path and waypoints:
        path = [waypoints[0]]
    gap = goal_gap(path[-1], problem.goal) if path else math.inf
    length = space.path_length(path) if len(path) > 1 else 0.0
    scoo = space.scoo_cost(path) if len(path) > 1 else 0.0
    return PlanResult(
        status=status,
        path=path,
        length=length,
        scoo=scoo,
        iterations=iterations,
        wall_time=time.perf_counter() - t0,
        goal_gap=gap,
        waypoints=waypoints,
        cost_history=history,
        objective=config.objective,
    )


def _trivial(space, problem, config, t0):
    if problem.start == problem.goal:
        return _finish(space, problem, config, EXACT, [problem.start], [], 0, t0, [(0, 0.0)])
    return None


def _steer(space: ElevationStateSpace, a: np.ndarray, b: np.ndarray, reach: float) -> np.ndarray:
    """Pose at most ``reach`` (planar arc length) from ``a`` towards ``b``; z is a placeholder."""
    if space.model.mode == DUBINS:
        path = dubins_shortest_path(a[:3], b[:3], space.model.turning_radius)
        if path.length <= reach:
            return b.copy()
        x, y, yaw = path.sample(reach)[0]
        return np.array([x, y, yaw, a[3]])
    d = math.hypot(b[0] - a[0], b[1] - a[1])
    if d <= reach:
        return b.copy()
    f = reach / d
    dyaw = math.remainder(b[2] - a[2], 2 * math.pi)
    return np.array([a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]), a[2] + f * dyaw, a[3]])


def rrt_star(space: ElevationStateSpace, problem: PlanningProblem, config: PlannerConfig) -> PlanResult:
    """Anytime RRT* with k-nearest rewiring.

    Returns the cheapest exact solution found, else the tree vertex closest
    to the goal when it lies within the approximate tolerance, else failure.
    """
    t0 = time.perf_counter()
    _check_endpoints(space, problem)
    trivial = _trivial(space, problem, config, t0)
    if trivial is not None:
        return trivial
    deadline = t0 + problem.timeout
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x5252]))
    sampler = space.sampler(SamplerConfig(config.sampler, max_cost=space.volume.max_cost))
    objective = _Objective(space, config)
    reach = config.range or 8.0 * space.volume.voxel_size
    goal = problem.goal.as_array()

    cap = 1024
    V = np.empty((cap, 4))
    V[0] = problem.start.as_array()
    parent = [-1]
    cost = [0.0]
    children: list[list[int]] = [[]]
    edge_trace: list[MotionTrace | None] = [None]
    n = 1
    goal_vertices: list[int] = []
    history: list[tuple[int, float]] = []
    best_cost = math.inf
    it = 0
    pool = np.empty((0, 4))
    exact_tol = problem.goal_tolerance_exact

    while True:
        if config.max_iterations is not None and it >= config.max_iterations:
            break
        if time.perf_counter() >= deadline:
            break
        it += 1
        if rng.random() < config.goal_bias:
            target = goal
        else:
            if len(pool) == 0:
                pool = sampler.sample_many(rng, 64)
            target, pool = pool[0], pool[1:]

        d_in = space.distances(target, V[:n], reverse=True)
        i_near = int(np.argmin(d_in))
        new = _steer(space, V[i_near], target, reach)
        # the steered pose has no height yet: adopt the chain's terminal height
        tr = space.trace(V[i_near], new, free_end=True)
        new[3] = tr.states[-1, 3]
        if not tr.valid:
            continue

        # choose parent among k nearest
        k = _neighbour_count(config, n + 1)
        d_to_new = space.distances(new, V[:n], reverse=True)
        near = np.argsort(d_to_new, kind="stable")[:k]
        best_p, best_c, best_tr = i_near, cost[i_near] + objective.edge(tr), tr
        lb = objective.lower_bound(d_to_new)
        for j in sorted(near.tolist(), key=lambda j: cost[j] + lb[j]):
            if j == i_near:
                continue
            if cost[j] + lb[j] >= best_c:
                break
            trj = space.trace(V[j], new)
            if not trj.valid:
                continue
            c = cost[j] + objective.edge(trj)
            if c < best_c:
                best_p, best_c, best_tr = j, c, trj

        if n == cap:
            cap *= 2
            V = np.vstack([V, np.empty((cap - n, 4))])
        v = n
        V[v] = new
        n += 1
        parent.append(best_p)
        cost.append(best_c)
        children.append([])
        children[best_p].append(v)
        edge_trace.append(best_tr)

        # rewire neighbours through the new vertex
        d_from_new = space.distances(new, V[:v], reverse=False)
        lb_out = objective.lower_bound(d_from_new)
        for j in near.tolist():
            if j == best_p or j == 0:
                continue
            if best_c + lb_out[j] >= cost[j]:
                continue
            trj = space.trace(new, V[j])
            if not trj.valid:
                continue
            c = best_c + objective.edge(trj)
            if c < cost[j]:
                children[parent[j]].remove(j)
                parent[j] = v
                children[v].append(j)
                edge_trace[j] = trj
                delta = c - cost[j]
                stack = [j]
                while stack:
                    u = stack.pop()
                    cost[u] += delta
                    stack.extend(children[u])

        if goal_gap(new, problem.goal) < exact_tol:
            goal_vertices.append(v)
        if goal_vertices:
            current = min(cost[g] for g in goal_vertices)
            if current < best_cost:
                best_cost = current
                history.append((it, best_cost))
            if config.stop_on_first:
                break

    if goal_vertices:
        end = min(goal_vertices, key=lambda g: (cost[g], g))
        status = EXACT
    else:
        gaps = np.sqrt(((V[:n, [0, 1, 3]] - goal[[0, 1, 3]]) ** 2).sum(axis=1))
        end = int(np.argmin(gaps))
        status = classify_gap(float(gaps[end]), exact_tol, problem.goal_tolerance_approx)
        if status == FAILED:
            return PlanResult(FAILED, [], 0.0, 0.0, it, time.perf_counter() - t0,
                              float(gaps[end]), [], history, config.objective)
    chain = []
    u = end
    while u != -1:
        chain.append(u)
        u = parent[u]
    chain.reverse()
    waypoints = [ElevationState(*V[u].tolist()) for u in chain]
    traces = [edge_trace[u] for u in chain[1:]]
    return _finish(space, problem, config, status, waypoints, traces, it, t0, history)


class _UnionFind:
    def __init__(self):
        self.parent: list[int] = []

    def add(self) -> int:
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, i: int) -> int:
        p = self.parent
        while p[i] != i:
            p[i] = p[p[i]]
            i = p[i]
        return i

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra < rb:
                ra, rb = rb, ra
            self.parent[ra] = rb


def _dijkstra(adj: list[dict[int, float]], source: int):
    dist = {source: 0.0}
    prev = {source: -1}
    heap = [(0.0, source)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w in adj[u].items():
            nd = d + w
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, prev


def prm_star(space: ElevationStateSpace, problem: PlanningProblem, config: PlannerConfig) -> PlanResult:
    """Incremental PRM*: batches of samples, k-nearest connections, shortest path by objective.

    Start and goal are roadmap vertices. Edges are directed in Dubins mode
    and undirected otherwise.
    """
    t0 = time.perf_counter()
    _check_endpoints(space, problem)
    trivial = _trivial(space, problem, config, t0)
    if trivial is not None:
        return trivial
    deadline = t0 + problem.timeout
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x5052]))
    sampler = space.sampler(SamplerConfig(config.sampler, max_cost=space.volume.max_cost))
    objective = _Objective(space, config)
    directed = space.model.mode == DUBINS
    check_samples = config.sampler == UNIFORM_BOX

    cap = 1024
    V = np.empty((cap, 4))
    adj: list[dict[int, float]] = []
    uf = _UnionFind()
    n = 0
    # (a, b) -> whether the edge was validated as traced from a to b
    forward: dict[tuple[int, int], bool] = {}
    history: list[tuple[int, float]] = []
    best_cost = math.inf
    best_route: list[int] | None = None
    it = 0

    def add_vertex(state: np.ndarray) -> int:
        nonlocal n, cap, V
        if n == cap:
            cap *= 2
            V = np.vstack([V, np.empty((cap - n, 4))])
        V[n] = state
        adj.append({})
        uf.add()
        n += 1
        return n - 1

    def connect(v: int) -> None:
        if v == 0:
            return
        k = _neighbour_count(config, n)
        d_out = space.distances(V[v], V[:v], reverse=False)
        if directed:
            d_in = space.distances(V[v], V[:v], reverse=True)
            near = np.argsort(np.minimum(d_out, d_in), kind="stable")[:k]
        else:
            near = np.argsort(d_out, kind="stable")[:k]
        for u in near.tolist():
            tr = space.trace(V[v], V[u])
            if tr.valid:
                adj[v][u] = objective.edge(tr)
                forward[v, u] = True
                if not directed:
                    adj[u][v] = adj[v][u]
                    forward[u, v] = False
                uf.union(u, v)
            if directed:
                tr = space.trace(V[u], V[v])
                if tr.valid:
                    adj[u][v] = objective.edge(tr)
                    forward[u, v] = True
                    uf.union(u, v)

    start = add_vertex(problem.start.as_array())
    goal = add_vertex(problem.goal.as_array())
    connect(goal)
    stop = False
    while not stop:
        batch = sampler.sample_many(rng, config.batch_size)
        for row in batch:
            if config.max_iterations is not None and it >= config.max_iterations:
                stop = True
                break
            if time.perf_counter() >= deadline:
                stop = True
                break
            it += 1
            if check_samples and not space.is_state_valid(row):
                continue
            connect(add_vertex(row))
        if uf.find(start) == uf.find(goal):
            dist, prev = _dijkstra(adj, start)
            if goal in dist and dist[goal] < best_cost:
                best_cost = dist[goal]
                history.append((it, best_cost))
                route = []
                u = goal
                while u != -1:
                    route.append(u)
                    u = prev[u]
                best_route = route[::-1]
                if config.stop_on_first:
                    break

    if best_route is not None:
        status = EXACT
        route = best_route
    else:
        dist, prev = _dijkstra(adj, start)
        reach = sorted(dist)
        gaps = np.sqrt(((V[reach][:, [0, 1, 3]] - V[goal, [0, 1, 3]]) ** 2).sum(axis=1))
        j = int(np.argmin(gaps))
        status = classify_gap(float(gaps[j]), problem.goal_tolerance_exact, problem.goal_tolerance_approx)
        if status == FAILED:
            return PlanResult(FAILED, [], 0.0, 0.0, it, time.perf_counter() - t0,
                              float(gaps[j]), [], history, config.objective)
        route = []
        u = reach[j]
        while u != -1:
            route.append(u)
            u = prev[u]
        route.reverse()
    waypoints = [ElevationState(*V[u].tolist()) for u in route]
    # replay each edge in the direction it was checked in
    traces = [space.trace(V[a], V[b]) if forward[a, b] else space.trace(V[b], V[a]).reversed()
              for a, b in zip(route[:-1], route[1:])]
    return _finish(space, problem, config, status, waypoints, traces, it, t0, history)


def plan(space: ElevationStateSpace, problem: PlanningProblem, config: PlannerConfig) -> PlanResult:
    if config.planner == RRT_STAR:
        return rrt_star(space, problem, config)
    return prm_star(space, problem, config)
