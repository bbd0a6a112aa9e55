"""Surfel construction, terrain cost critics and the elevated waffle volume.

Pipeline: voxel-downsample the raw map, fit a plane around every sampled
point, score the patch with four critics (tilt, roughness, height
difference, ground clearance), regress a bounded cost, then lift every
surfel along its normal and stack copies into waffles.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    AllZeroWeights,
    DegenerateGeometry,
    EmptyCloud,
    EmptyNeighborhood,
    InsufficientPoints,
    InvalidConfig,
    NoTraversableSurfels,
)
from .pointcloud_io import PointCloud
from .spatial_index import voxel_downsample

DEFAULT_MAX_COST = 255.0


@dataclass(frozen=True)
class CriticValues:
    tilt: float  # rad
    roughness: float  # m
    height_diff: float  # m
    ground_clearance: float  # m

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.tilt, self.roughness, self.height_diff, self.ground_clearance)


@dataclass(frozen=True)
class CostConfig:
    """Critic weights, per-critic admissible ranges and the cost ceiling."""

    w_tilt: float = 0.25
    w_roughness: float = 0.25
    w_height_diff: float = 0.25
    w_ground_clearance: float = 0.25
    max_tilt: float = 0.45
    max_roughness: float = 0.08
    max_height_diff: float = 1.0
    max_ground_clearance: float = 0.25
    max_cost: float = DEFAULT_MAX_COST

    def __post_init__(self):
        if min(self.weights) < 0:
            raise InvalidConfig("critic weights must be non-negative")
        if min(self.ranges) <= 0:
            raise InvalidConfig("critic ranges must be positive")
        if not self.max_cost > 0:
            raise InvalidConfig("max_cost must be positive")

    @property
    def weights(self) -> tuple[float, float, float, float]:
        return (self.w_tilt, self.w_roughness, self.w_height_diff, self.w_ground_clearance)

    @property
    def ranges(self) -> tuple[float, float, float, float]:
        return (self.max_tilt, self.max_roughness, self.max_height_diff, self.max_ground_clearance)


@dataclass(frozen=True)
class MapConfig:
    """Surfel construction and waffle stacking parameters.

    ``stack_count`` of ``None`` means ``ceil(robot_height / step_size)``.
    """

    voxel_size: float = 1.0
    elevation: float = 0.4  # d_e, robot centre-of-gravity height
    step_size: float = 0.2  # s_size
    robot_height: float = 1.0
    stack_count: int | None = None
    ransac_iterations: int = 100
    ransac_threshold: float = 0.05
    min_neighbors: int = 5
    seed: int = 0

    def __post_init__(self):
        if not self.voxel_size > 0:
            raise InvalidConfig("voxel_size must be positive")
        if not self.elevation > 0 or not self.step_size > 0 or not self.robot_height > 0:
            raise InvalidConfig("elevation, step_size and robot_height must be positive")
        if self.stack_count is not None and self.stack_count < 1:
            raise InvalidConfig("stack_count must be >= 1")
        if self.ransac_iterations < 1 or not self.ransac_threshold > 0:
            raise InvalidConfig("invalid RANSAC settings")
        if self.min_neighbors < 3:
            raise InvalidConfig("min_neighbors must be >= 3")

    @property
    def effective_stack_count(self) -> int:
        if self.stack_count is not None:
            return self.stack_count
        return max(1, math.ceil(self.robot_height / self.step_size - 1e-9))


@dataclass(frozen=True)
class Surfel:
    position: tuple[float, float, float]
    normal: tuple[float, float, float]
    radius: float
    critics: CriticValues
    cost: float
    traversable: bool


# ---------------------------------------------------------------- plane fit

def _orient(normal: np.ndarray, offset: float) -> tuple[float, float, float, float]:
    norm = np.linalg.norm(normal)
    a, b, c = normal / norm
    d = offset / norm
    if c < 0:
        a, b, c, d = -a, -b, -c, -d
    return float(a), float(b), float(c), float(d)


def _least_squares_plane(pts: np.ndarray) -> tuple[np.ndarray, float]:
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, vecs = np.linalg.eigh(centered.T @ centered)
    normal = vecs[:, 0]
    return normal, -float(normal @ centroid)


def fit_plane_ransac(points, iterations: int = 100, inlier_threshold: float = 0.05,
                     seed: int | np.random.Generator = 0) -> tuple[float, float, float, float]:
    """RANSAC plane ``Ax + By + Cz + D = 0`` refined by least squares on the inliers.

    Returned coefficients have ``|(A, B, C)| = 1`` and ``C >= 0``.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if n < 3:
        raise InsufficientPoints(f"plane fitting needs >= 3 points, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    # three distinct indices per hypothesis
    i0 = rng.integers(0, n, iterations)
    i1 = rng.integers(0, n - 1, iterations)
    i1 = i1 + (i1 >= i0)
    lo, hi = np.minimum(i0, i1), np.maximum(i0, i1)
    i2 = rng.integers(0, n - 2, iterations)
    i2 = i2 + (i2 >= lo)
    i2 = i2 + (i2 >= hi)

    p0 = pts[i0]
    normals = np.cross(pts[i1] - p0, pts[i2] - p0)
    lengths = np.linalg.norm(normals, axis=1)
    scale = np.max(np.ptp(pts, axis=0)) if n else 0.0
    ok = lengths > 1e-12 * max(scale * scale, 1e-300)
    if not np.any(ok):
        raise DegenerateGeometry("all sampled point triples are collinear")
    normals = normals[ok] / lengths[ok, None]
    offsets = -np.einsum("ij,ij->i", normals, p0[ok])
    residuals = np.abs(pts @ normals.T + offsets)  # (n, hypotheses)
    counts = (residuals <= inlier_threshold).sum(axis=0)
    best = int(np.argmax(counts))
    inliers = residuals[:, best] <= inlier_threshold

    normal, offset = normals[best], offsets[best]
    if inliers.sum() >= 3:
        ls_normal, ls_offset = _least_squares_plane(pts[inliers])
        if np.all(np.isfinite(ls_normal)):
            normal, offset = ls_normal, ls_offset
    return _orient(normal, offset)


# ------------------------------------------------------------------ critics

def point_plane_distances(plane, pts: np.ndarray) -> np.ndarray:
    a, b, c, d = plane
    return np.abs(pts @ np.array([a, b, c]) + d) / math.sqrt(a * a + b * b + c * c)


def compute_critics(plane, neighbor_points) -> CriticValues:
    pts = np.asarray(neighbor_points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyNeighborhood("critics need at least one neighbour point")
    a, b, c, _ = plane
    # roll and pitch of the surfel normal
    tilt = max(abs(math.atan2(a, c)), abs(math.atan2(b, c)))
    dist = point_plane_distances(plane, pts)
    return CriticValues(
        tilt=min(tilt, math.pi / 2),
        roughness=float(dist.mean()),
        height_diff=float(pts[:, 2].max() - pts[:, 2].min()),
        ground_clearance=float(dist.max()),
    )


def regress_cost(critics: CriticValues, config: CostConfig) -> tuple[float, bool]:
    """Weighted, range-normalised cost in ``[0, max_cost]`` and a traversability flag."""
    total_w = sum(config.weights)
    if total_w <= 0:
        raise AllZeroWeights("at least one critic weight must be positive")
    raw = critics.as_tuple()
    acc = 0.0
    for value, w, limit in zip(raw, config.weights, config.ranges):
        acc += w * min(max(value / limit, 0.0), 1.0)
    cost = config.max_cost * acc / total_w
    traversable = all(value <= limit for value, limit in zip(raw, config.ranges))
    return min(cost, config.max_cost), traversable


# ------------------------------------------------------------ surfel set

def _surfel_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def build_surfel_set(cloud: PointCloud, voxel_size: float, config: CostConfig | None = None,
                     seed: int = 0, map_config: MapConfig | None = None) -> list[Surfel]:
    """One surfel per occupied voxel with enough neighbours for a plane fit.

    Neighbours are gathered from the full cloud within ``voxel_size`` of the
    sampled point; the surfel radius is ``voxel_size / 2``.
    """
    if len(cloud) == 0:
        raise EmptyCloud("cannot build surfels from an empty cloud")
    config = config or CostConfig()
    mc = map_config or MapConfig(voxel_size=voxel_size, seed=seed)
    sampled = voxel_downsample(cloud, voxel_size).points
    tree = cKDTree(cloud.points)
    neighborhoods = tree.query_ball_point(sampled, voxel_size * (1.0 + 1e-12))
    radius = voxel_size / 2.0

    surfels = []
    for i, (pos, nbrs) in enumerate(zip(sampled, neighborhoods)):
        if len(nbrs) < mc.min_neighbors:
            continue
        nbr_pts = cloud.points[np.sort(np.asarray(nbrs, dtype=np.intp))]
        try:
            plane = fit_plane_ransac(nbr_pts, mc.ransac_iterations, mc.ransac_threshold,
                                     _surfel_rng(seed, i))
        except DegenerateGeometry:
            continue
        critics = compute_critics(plane, nbr_pts)
        cost, ok = regress_cost(critics, config)
        surfels.append(Surfel(
            position=tuple(float(v) for v in pos),
            normal=plane[:3],
            radius=radius,
            critics=critics,
            cost=cost,
            traversable=ok,
        ))
    return surfels


# ----------------------------------------------------------- elevation volume

@dataclass(eq=False)
class ElevationVolume:
    """Elevated surfels (one waffle each) plus the indices used for snapping.

    Arrays are indexed by surfel id. ``positions`` hold the elevated base
    layer, ``ground_positions`` the original surfel centres on the terrain.
    Non-traversable surfels are kept (flagged) so that blocked terrain stays
    blocked instead of snapping onto a traversable neighbour.
    """

    ground_positions: np.ndarray
    normals: np.ndarray
    radii: np.ndarray
    critics: np.ndarray  # (n, 4): tilt, roughness, height_diff, ground_clearance
    costs: np.ndarray
    traversable: np.ndarray
    elevation: float
    step_size: float
    stack_count: int
    voxel_size: float
    max_cost: float = DEFAULT_MAX_COST
    snap_radius: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ground_positions = np.asarray(self.ground_positions, dtype=np.float64).reshape(-1, 3)
        self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
        self.radii = np.asarray(self.radii, dtype=np.float64).reshape(-1)
        self.critics = np.asarray(self.critics, dtype=np.float64).reshape(-1, 4)
        self.costs = np.asarray(self.costs, dtype=np.float64).reshape(-1)
        self.traversable = np.asarray(self.traversable, dtype=bool).reshape(-1)
        if self.snap_radius <= 0:
            self.snap_radius = 1.5 * self.voxel_size
        self.positions = self.ground_positions + self.elevation * self.normals
        for arr in (self.ground_positions, self.normals, self.radii, self.critics,
                    self.costs, self.traversable, self.positions):
            arr.setflags(write=False)
        n = len(self.positions)
        self.tree2d = cKDTree(self.positions[:, :2]) if n else None
        self.ground_tree = cKDTree(self.ground_positions) if n else None
        self.traversable_ids = np.flatnonzero(self.traversable)

    @property
    def size(self) -> int:
        return len(self.positions)

    def waffle(self, i: int) -> np.ndarray:
        """Layer positions of surfel ``i``'s waffle, base layer first."""
        k = np.arange(self.stack_count, dtype=np.float64)
        heights = self.elevation + k * self.step_size
        return self.ground_positions[i] + heights[:, None] * self.normals[i]

    def surfel(self, i: int, elevated: bool = True) -> Surfel:
        pos = self.positions[i] if elevated else self.ground_positions[i]
        return Surfel(
            position=tuple(float(v) for v in pos),
            normal=tuple(float(v) for v in self.normals[i]),
            radius=float(self.radii[i]),
            critics=CriticValues(*(float(v) for v in self.critics[i])),
            cost=float(self.costs[i]),
            traversable=bool(self.traversable[i]),
        )

    @property
    def surfels(self) -> list[Surfel]:
        return [self.surfel(i) for i in range(self.size)]

    # -- serialization
    def to_dict(self) -> dict:
        return {
            "format": "surfelnav.volume/1",
            "elevation": self.elevation,
            "step_size": self.step_size,
            "stack_count": self.stack_count,
            "voxel_size": self.voxel_size,
            "max_cost": self.max_cost,
            "snap_radius": self.snap_radius,
            "metadata": self.metadata,
            "surfels": [
                {
                    "position": self.ground_positions[i].tolist(),
                    "normal": self.normals[i].tolist(),
                    "radius": float(self.radii[i]),
                    "critics": dict(zip(
                        ("tilt", "roughness", "height_diff", "ground_clearance"),
                        self.critics[i].tolist())),
                    "cost": float(self.costs[i]),
                    "traversable": bool(self.traversable[i]),
                }
                for i in range(self.size)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, doc: dict) -> ElevationVolume:
        if doc.get("format") != "surfelnav.volume/1":
            raise InvalidConfig(f"unrecognised volume format {doc.get('format')!r}")
        s = doc["surfels"]
        keys = ("tilt", "roughness", "height_diff", "ground_clearance")
        return cls(
            ground_positions=[e["position"] for e in s],
            normals=[e["normal"] for e in s],
            radii=[e["radius"] for e in s],
            critics=[[e["critics"][k] for k in keys] for e in s],
            costs=[e["cost"] for e in s],
            traversable=[e["traversable"] for e in s],
            elevation=doc["elevation"],
            step_size=doc["step_size"],
            stack_count=doc["stack_count"],
            voxel_size=doc["voxel_size"],
            max_cost=doc["max_cost"],
            snap_radius=doc["snap_radius"],
            metadata=doc.get("metadata", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> ElevationVolume:
        return cls.from_dict(json.loads(text))


def elevate_and_stack(surfels: list[Surfel], elevation: float, step_size: float,
                      stack_count: int, voxel_size: float | None = None,
                      max_cost: float = DEFAULT_MAX_COST, snap_radius: float = 0.0,
                      metadata: dict | None = None) -> ElevationVolume:
    """Lift every surfel by ``elevation`` along its normal and stack waffles.

    Layer ``k`` of a waffle sits at ``v + (elevation + k * step_size) * n``.
    """
    if not elevation > 0 or not step_size > 0 or stack_count < 1:
        raise InvalidConfig("elevation and step_size must be positive, stack_count >= 1")
    if not any(s.traversable for s in surfels):
        raise NoTraversableSurfels("no traversable surfel to build a state space on")
    if voxel_size is None:
        voxel_size = 2.0 * surfels[0].radius
    return ElevationVolume(
        ground_positions=[s.position for s in surfels],
        normals=[s.normal for s in surfels],
        radii=[s.radius for s in surfels],
        critics=[s.critics.as_tuple() for s in surfels],
        costs=[s.cost for s in surfels],
        traversable=[s.traversable for s in surfels],
        elevation=elevation,
        step_size=step_size,
        stack_count=stack_count,
        voxel_size=voxel_size,
        max_cost=max_cost,
        snap_radius=snap_radius,
        metadata=metadata or {},
    )


def build_volume(cloud: PointCloud, map_config: MapConfig | None = None,
                 cost_config: CostConfig | None = None, snap_radius: float = 0.0) -> ElevationVolume:
    """Full map build: surfels from the raw cloud, then the elevated volume."""
    mc = map_config or MapConfig()
    cc = cost_config or CostConfig()
    surfels = build_surfel_set(cloud, mc.voxel_size, cc, mc.seed, mc)
    return elevate_and_stack(
        surfels, mc.elevation, mc.step_size, mc.effective_stack_count,
        voxel_size=mc.voxel_size, max_cost=cc.max_cost, snap_radius=snap_radius,
        metadata={"map": asdict(mc), "cost": asdict(cc)},
    )
