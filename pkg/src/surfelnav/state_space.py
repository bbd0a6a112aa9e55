"""Elevation state space: SE2 poses constrained to the elevated surfel layer.

A state is ``(x, y, yaw, z)``. The planar part lives in SE2 (optionally with
Dubins kinematics); ``z`` is not free but pinned to the elevated surfel the
pose snaps onto. Snapping is layer-aware so that overlapping surfaces (a
deck above a floor) stay distinct.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dubins import dubins_lengths, dubins_shortest_path, wrap_angle
from .errors import InvalidConfig, InvalidPathState, NoValidSamples, OffSurface
from .surfel_map import ElevationVolume

EUCLIDEAN = "euclidean-se2"
DUBINS = "dubins"

UNIFORM_VALID = "uniform-valid"
COST_WEIGHTED = "cost-weighted"
# not SVSS: uniform over the map's bounding box, invalid draws are wasted
UNIFORM_BOX = "uniform-box"
SAMPLER_MODES = (UNIFORM_VALID, COST_WEIGHTED, UNIFORM_BOX)

_CANDIDATES = 16
_MAX_SNAP_ROUNDS = 16
_MIN_PLANE_NZ = 0.5  # steeper surfels report their centre height


@dataclass(frozen=True)
class ElevationState:
    x: float
    y: float
    yaw: float
    z: float

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    @property
    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.yaw)

    @property
    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.yaw, self.z])

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "yaw": self.yaw, "z": self.z}


@dataclass(frozen=True)
class MotionModel:
    mode: str = EUCLIDEAN
    turning_radius: float = 1.0
    z_weight: float = 1.0
    yaw_weight: float = 0.5

    def __post_init__(self):
        if self.mode not in (EUCLIDEAN, DUBINS):
            raise InvalidConfig(f"unknown motion model {self.mode!r}")
        if self.mode == DUBINS and not self.turning_radius > 0:
            raise InvalidConfig("dubins turning radius must be positive")
        if self.z_weight < 0 or self.yaw_weight < 0:
            raise InvalidConfig("distance weights must be non-negative")

    @property
    def symmetric(self) -> bool:
        return self.mode == EUCLIDEAN


@dataclass(frozen=True)
class SamplerConfig:
    bias_mode: str = COST_WEIGHTED
    max_cost: float = 255.0
    epsilon: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.bias_mode not in SAMPLER_MODES:
            raise InvalidConfig(f"unknown sampler mode {self.bias_mode!r}")
        if not self.max_cost > 0 or not self.epsilon > 0:
            raise InvalidConfig("max_cost and epsilon must be positive")


@dataclass(frozen=True)
class SpaceParams:
    """Contact and motion-checking tolerances; ``None`` derives from the voxel size."""

    z_tolerance: float = 0.3
    z_step_max: float = 0.3
    snap_radius: float | None = None
    motion_step: float | None = None

    def __post_init__(self):
        if not self.z_tolerance > 0 or not self.z_step_max > 0:
            raise InvalidConfig("z tolerances must be positive")
        if self.snap_radius is not None and not self.snap_radius > 0:
            raise InvalidConfig("snap_radius must be positive")
        if self.motion_step is not None and not self.motion_step > 0:
            raise InvalidConfig("motion_step must be positive")


def _as_state(s) -> ElevationState:
    if isinstance(s, ElevationState):
        return s
    x, y, yaw, z = (float(v) for v in s)
    return ElevationState(x, y, yaw, z)


def distance(model: MotionModel, a, b) -> float:
    a, b = _as_state(a), _as_state(b)
    dz = model.z_weight * abs(b.z - a.z)
    if model.mode == DUBINS:
        return dubins_shortest_path(a.pose, b.pose, model.turning_radius).length + dz
    planar = math.hypot(b.x - a.x, b.y - a.y)
    return planar + model.yaw_weight * abs(wrap_angle(b.yaw - a.yaw)) + dz


def distances(model: MotionModel, a, others: np.ndarray, reverse: bool = False) -> np.ndarray:
    """Vectorised ``distance(a, o)`` for rows ``o = (x, y, yaw, z)`` of ``others``.

    ``reverse`` computes ``distance(o, a)`` (only differs for Dubins).
    """
    a = np.asarray(_as_state(a).as_array() if isinstance(a, ElevationState) else a, dtype=np.float64)
    o = np.asarray(others, dtype=np.float64).reshape(-1, 4)
    dz = model.z_weight * np.abs(o[:, 3] - a[3])
    if model.mode == DUBINS:
        return dubins_lengths(a[:3], o[:, :3], model.turning_radius, reverse=reverse) + dz
    planar = np.hypot(o[:, 0] - a[0], o[:, 1] - a[1])
    dyaw = np.abs(np.remainder(o[:, 2] - a[2] + np.pi, 2 * np.pi) - np.pi)
    return planar + model.yaw_weight * dyaw + dz


@dataclass
class MotionTrace:
    """Dense discretisation of one motion with the surfel under every pose.

    ``states`` rows are ``(x, y, yaw, z)``; ``surfels`` holds -1 where the
    pose fell off the surface.
    """

    states: np.ndarray
    surfels: np.ndarray
    valid: bool
    planar_length: float

    def to_states(self) -> list[ElevationState]:
        return [ElevationState(*row) for row in self.states.tolist()]

    def reversed(self) -> MotionTrace:
        return MotionTrace(self.states[::-1].copy(), self.surfels[::-1].copy(), self.valid, self.planar_length)


class ElevationStateSpace:
    """Queries over one immutable :class:`ElevationVolume`.

    Holds no mutable state; any RNG is passed in by the caller, so a single
    instance can serve concurrent planner queries.
    """

    def __init__(self, volume: ElevationVolume, model: MotionModel | None = None,
                 params: SpaceParams | None = None):
        if volume.size == 0:
            raise InvalidConfig("state space needs a non-empty volume")
        self.volume = volume
        self.model = model or MotionModel()
        self.params = params or SpaceParams()
        self.snap_radius = self.params.snap_radius or volume.snap_radius
        self.motion_step = self.params.motion_step or volume.voxel_size / 2.0
        self._xy = volume.positions[:, :2]
        self._z = volume.positions[:, 2]
        self._zlist = self._z.tolist()
        # heights are read off each surfel's tangent plane, so they vary
        # continuously across a slope instead of stepping at surfel borders
        n = volume.normals
        steep = n[:, 2] < _MIN_PLANE_NZ
        nz = np.where(steep, 1.0, n[:, 2])
        self._gx = np.where(steep, 0.0, -n[:, 0] / nz).tolist()
        self._gy = np.where(steep, 0.0, -n[:, 1] / nz).tolist()
        self._px = volume.positions[:, 0].tolist()
        self._py = volume.positions[:, 1].tolist()
        self._trav = volume.traversable.tolist()
        self._k = min(_CANDIDATES, volume.size)
        lo = volume.positions.min(axis=0)
        hi = volume.positions.max(axis=0)
        self.bounds = (lo, hi)

    def with_model(self, model: MotionModel) -> ElevationStateSpace:
        return ElevationStateSpace(self.volume, model, self.params)

    # ------------------------------------------------------------ snapping
    def _candidates(self, xy: np.ndarray):
        d, idx = self.volume.tree2d.query(xy, k=self._k, distance_upper_bound=self.snap_radius)
        if self._k == 1:
            d, idx = d[..., None], idx[..., None]
        return d, idx

    def snap_to_surface(self, x: float, y: float) -> tuple[int, float]:
        """Horizontally nearest elevated surfel; ties go to the lower one."""
        d, idx = self._candidates(np.array([[x, y]]))
        d, idx = d[0], idx[0]
        hit = np.isfinite(d)
        if not hit.any():
            raise OffSurface(f"no surfel within {self.snap_radius:.3g} m of ({x:.3f}, {y:.3f})")
        d, idx = d[hit], idx[hit]
        order = np.lexsort((self._z[idx], d))
        best = int(idx[order[0]])
        return best, self.height_at(best, x, y)

    def height_at(self, i: int, x: float, y: float) -> float:
        """Height of surfel ``i``'s elevated tangent plane at ``(x, y)``."""
        return self._zlist[i] + self._gx[i] * (x - self._px[i]) + self._gy[i] * (y - self._py[i])

    def heights_at(self, ids: np.ndarray, xy: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`height_at` for surfels ``ids`` at points ``xy`` (n, 2)."""
        ids = np.asarray(ids)
        gx = np.asarray(self._gx)[ids]
        gy = np.asarray(self._gy)[ids]
        p = self.volume.positions[ids]
        return p[:, 2] + gx * (xy[:, 0] - p[:, 0]) + gy * (xy[:, 1] - p[:, 1])

    def _settle(self, x: float, y: float, dists: list[float], ids: list[int],
                z_ref: float) -> tuple[int, float]:
        """Pick the candidate nearest to ``(x, y, z_ref)`` and iterate to a fixed point.

        Every round strictly reduces the horizontal offset, so this ends; the
        result is stable when re-snapped from its own height, which keeps
        re-validation of returned states consistent with motion checking.
        """
        heights = [self.height_at(i, x, y) for i in ids]
        best, z_best = -1, z_ref
        for _ in range(_MAX_SNAP_ROUNDS):
            best_score = math.inf
            pick = -1
            for k, dh in enumerate(dists):
                dz = heights[k] - z_ref
                score = dh * dh + dz * dz
                if score < best_score:
                    best_score, pick = score, k
            if ids[pick] == best:
                break
            best, z_best = ids[pick], heights[pick]
            z_ref = z_best
        return best, z_best

    def snap_near(self, reference, x: float, y: float) -> tuple[int, float]:
        """Snap ``(x, y)`` onto the surface layer closest to ``reference.z``."""
        ref = _as_state(reference)
        d, idx = self._candidates(np.array([[x, y]]))
        hit = np.isfinite(d[0])
        if not hit.any():
            raise OffSurface(f"no surfel within {self.snap_radius:.3g} m of ({x:.3f}, {y:.3f})")
        return self._settle(x, y, d[0][hit].tolist(), idx[0][hit].tolist(), ref.z)

    def is_state_valid(self, state) -> bool:
        try:
            s = _as_state(state)
        except (TypeError, ValueError):
            return False
        if not all(math.isfinite(v) for v in (s.x, s.y, s.yaw, s.z)):
            return False
        try:
            sid, z = self.snap_near(s, s.x, s.y)
        except OffSurface:
            return False
        return self._trav[sid] and abs(s.z - z) <= self.params.z_tolerance

    def surfel_of(self, state) -> int:
        s = _as_state(state)
        return self.snap_near(s, s.x, s.y)[0]

    def state_at_surfel(self, i: int, yaw: float = 0.0) -> ElevationState:
        p = self.volume.positions[i]
        return ElevationState(float(p[0]), float(p[1]), yaw, float(p[2]))

    # ------------------------------------------------------------- metrics
    def distance(self, a, b) -> float:
        return distance(self.model, a, b)

    def distances(self, a, others: np.ndarray, reverse: bool = False) -> np.ndarray:
        return distances(self.model, a, others, reverse)

    # -------------------------------------------------------------- motion
    def _planar_poses(self, a: ElevationState, b: ElevationState, step: float):
        if self.model.mode == DUBINS:
            path = dubins_shortest_path(a.pose, b.pose, self.model.turning_radius)
            length = path.length
            n = max(1, math.ceil(length / step - 1e-9))
            poses = path.sample(np.linspace(0.0, length, n + 1))
        else:
            length = math.hypot(b.x - a.x, b.y - a.y)
            n = max(1, math.ceil(length / step - 1e-9))
            f = np.linspace(0.0, 1.0, n + 1)
            dyaw = wrap_angle(b.yaw - a.yaw)
            poses = np.column_stack([
                a.x + f * (b.x - a.x),
                a.y + f * (b.y - a.y),
                np.remainder(a.yaw + f * dyaw + np.pi, 2 * np.pi) - np.pi,
            ])
        poses[0] = a.pose
        poses[-1] = b.pose
        return poses, length

    def trace(self, a, b, step: float | None = None, free_end: bool = False) -> MotionTrace:
        """Discretise the SE2 geodesic from ``a`` to ``b`` and chain-snap heights.

        Validity: every pose snaps onto a traversable surfel, consecutive
        heights differ by at most ``z_step_max``, and the first and last
        snapped heights agree with ``a.z`` / ``b.z`` within ``z_tolerance``.
        ``free_end`` skips the check against ``b.z`` (used when steering to a
        pose whose height is not known yet).
        """
        a, b = _as_state(a), _as_state(b)
        step = step or self.motion_step
        if a == b:
            try:
                sid, z = self.snap_near(a, a.x, a.y)
            except OffSurface:
                sid, z = -1, a.z
            ok = sid >= 0 and self._trav[sid] and abs(z - a.z) <= self.params.z_tolerance
            return MotionTrace(a.as_array()[None, :], np.array([sid]), bool(ok), 0.0)
        poses, length = self._planar_poses(a, b, step)
        d, idx = self._candidates(poses[:, :2])
        dl, il = d.tolist(), idx.tolist()
        n = self.volume.size
        trav = self._trav
        ids = []
        zs = []
        z_ref = a.z
        valid = True
        zmax = self.params.z_step_max
        for (px, py), drow, irow in zip(poses[:, :2].tolist(), dl, il):
            cd = [dd for dd, ii in zip(drow, irow) if ii < n]
            if not cd:
                valid = False
                ids.append(-1)
                zs.append(z_ref)
                continue
            ci = [ii for ii in irow if ii < n]
            sid, z = self._settle(px, py, cd, ci, z_ref)
            if not trav[sid] or abs(z - z_ref) > (zmax if ids else self.params.z_tolerance):
                valid = False
            ids.append(sid)
            zs.append(z)
            z_ref = z
        if not free_end and abs(zs[-1] - b.z) > self.params.z_tolerance:
            valid = False
        states = np.column_stack([poses, np.asarray(zs)])
        return MotionTrace(states, np.asarray(ids), valid, length)

    def interpolate_motion(self, a, b, step: float | None = None) -> list[ElevationState]:
        a, b = _as_state(a), _as_state(b)
        if a == b:
            return [a]
        return self.trace(a, b, step).to_states()

    def is_motion_valid(self, a, b, step: float | None = None) -> bool:
        return self.trace(a, b, step).valid

    # --------------------------------------------------------- path costs
    def trace_length_cost(self, tr: MotionTrace) -> float:
        """Model distance along a trace: planar (+ yaw) part plus weighted |dz| variation."""
        st = tr.states
        if len(st) < 2:
            return 0.0
        zvar = float(np.abs(np.diff(st[:, 3])).sum())
        planar = tr.planar_length
        if self.model.mode == EUCLIDEAN:
            planar += self.model.yaw_weight * abs(wrap_angle(st[-1, 2] - st[0, 2]))
        return planar + self.model.z_weight * zvar

    def trace_scoo(self, tr: MotionTrace) -> float:
        st = tr.states
        if len(st) < 2:
            return 0.0
        seg = np.linalg.norm(np.diff(st[:, [0, 1, 3]], axis=0), axis=1)
        j = self.volume.costs[tr.surfels]
        return float(np.dot(seg, 0.5 * (j[:-1] + j[1:])))

    def path_length(self, path) -> float:
        """Sum of model distances between consecutive states."""
        return float(sum(distance(self.model, p, q) for p, q in zip(path[:-1], path[1:])))

    def scoo_cost(self, path) -> float:
        """Arc-length integral of surfel cost along a path (trapezoid per segment)."""
        states = [_as_state(s) for s in path]
        costs = []
        for s in states:
            if not self.is_state_valid(s):
                raise InvalidPathState(f"path state {s} is not valid")
            costs.append(float(self.volume.costs[self.surfel_of(s)]))
        total = 0.0
        for (p, q), cp, cq in zip(zip(states[:-1], states[1:]), costs[:-1], costs[1:]):
            seg = math.sqrt((q.x - p.x) ** 2 + (q.y - p.y) ** 2 + (q.z - p.z) ** 2)
            total += seg * 0.5 * (cp + cq)
        return total

    # ------------------------------------------------------------ sampling
    def sampler(self, config: SamplerConfig | None = None) -> SurfelSampler:
        return SurfelSampler(self, config or SamplerConfig())

    def sample_valid_state(self, config: SamplerConfig | None = None,
                           rng: np.random.Generator | None = None) -> ElevationState:
        config = config or SamplerConfig()
        rng = rng or np.random.default_rng(config.seed)
        return self.sampler(config).sample(rng)


class SurfelSampler:
    """Draws planner samples from surfels.

    ``uniform-valid`` picks a traversable surfel uniformly; ``cost-weighted``
    picks surfel ``i`` with probability proportional to
    ``max_cost / max(J_i, epsilon)`` so cheap terrain is sampled more often.
    ``uniform-box`` ignores surfels and returns uniform poses over the map's
    bounding box, most of which are invalid; it is the non-surfel baseline.
    """

    def __init__(self, space: ElevationStateSpace, config: SamplerConfig):
        self.space = space
        self.config = config
        vol = space.volume
        self.support = vol.traversable_ids
        if config.bias_mode != UNIFORM_BOX and len(self.support) == 0:
            raise NoValidSamples("volume has no traversable surfel to sample from")
        if config.bias_mode == COST_WEIGHTED:
            w = config.max_cost / np.maximum(vol.costs[self.support], config.epsilon)
            self.probabilities = w / w.sum()
        elif len(self.support):
            self.probabilities = np.full(len(self.support), 1.0 / len(self.support))
        else:
            self.probabilities = np.empty(0)
        self._cdf = np.cumsum(self.probabilities)
        if len(self._cdf):
            self._cdf[-1] = 1.0

    def draw_surfels(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random(n)
        return self.support[np.searchsorted(self._cdf, u, side="right").clip(0, len(self.support) - 1)]

    def sample_many(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` rows of ``(x, y, yaw, z)``. For ``uniform-box`` rows may be invalid."""
        if self.config.bias_mode == UNIFORM_BOX:
            lo, hi = self.space.bounds
            u = rng.random((n, 4))
            out = np.empty((n, 4))
            out[:, 0] = lo[0] + u[:, 0] * (hi[0] - lo[0])
            out[:, 1] = lo[1] + u[:, 1] * (hi[1] - lo[1])
            out[:, 2] = np.pi - 2 * np.pi * u[:, 2]
            out[:, 3] = lo[2] + u[:, 3] * (hi[2] - lo[2])
            return out
        ids = self.draw_surfels(rng, n)
        pos = self.space.volume.positions[ids]
        # (-pi, pi]
        yaw = np.pi - 2 * np.pi * rng.random(n)
        return np.column_stack([pos[:, 0], pos[:, 1], yaw, pos[:, 2]])

    def sample(self, rng: np.random.Generator) -> ElevationState:
        return ElevationState(*self.sample_many(rng, 1)[0].tolist())
