"""Seeded synthetic terrain point clouds used as benchmark fixtures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig
from .pointcloud_io import PointCloud

TERRAIN_KINDS = ("flat", "hills", "ramp", "wall-gap", "pier-overlap", "mixed")


@dataclass(frozen=True)
class TerrainSpec:
    """Which fixture to generate and its shape parameters.

    Unused parameters are ignored by kinds that do not need them. Extents are
    in metres, ``density`` in points per square metre.
    """

    kind: str = "flat"
    extent: tuple[float, float] = (20.0, 20.0)
    density: float = 25.0
    seed: int = 0
    jitter: float = 0.0  # fraction of grid spacing
    noise: float = 0.0  # std-dev of z noise (m)
    # hills
    hill_count: int = 24
    hill_amplitude: float = 5.0
    hill_sigma: tuple[float, float] = (2.0, 6.0)
    # ramp
    slope_deg: float = 20.0
    ramp_start: float = 5.0
    ramp_length: float = 10.0
    # wall-gap
    wall_height: float = 1.5
    wall_thickness: float = 1.0
    gap_width: float = 2.0
    wall_x: float | None = None
    gap_y: float | None = None
    # pier-overlap
    deck_height: float = 3.0
    deck_bounds: tuple[float, float, float, float] | None = None  # x0, x1, y0, y1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TERRAIN_KINDS:
            raise InvalidConfig(f"unknown terrain kind {self.kind!r}")
        if min(self.extent) <= 0 or self.density <= 0:
            raise InvalidConfig("extent and density must be positive")


def _grid(extent, density, rng, jitter) -> np.ndarray:
    spacing = 1.0 / math.sqrt(density)
    nx = max(1, round(extent[0] / spacing))
    ny = max(1, round(extent[1] / spacing))
    sx, sy = extent[0] / nx, extent[1] / ny
    gx, gy = np.meshgrid((np.arange(nx) + 0.5) * sx, (np.arange(ny) + 0.5) * sy, indexing="ij")
    xy = np.column_stack([gx.ravel(), gy.ravel()])
    if jitter > 0:
        xy += (rng.random(xy.shape) - 0.5) * jitter * np.array([sx, sy])
    return xy


def hills_height(xy: np.ndarray, spec: TerrainSpec) -> np.ndarray:
    """Sum of seeded Gaussian bumps (and dips); smooth and deterministic."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1]))
    w, h = spec.extent
    z = np.zeros(len(xy))
    for _ in range(spec.hill_count):
        cx, cy = rng.uniform(0, w), rng.uniform(0, h)
        sigma = rng.uniform(*spec.hill_sigma)
        amp = spec.hill_amplitude * rng.uniform(0.3, 1.0) * (1 if rng.random() < 0.75 else -1)
        z += amp * np.exp(-((xy[:, 0] - cx) ** 2 + (xy[:, 1] - cy) ** 2) / (2 * sigma * sigma))
    return z


def _ramp_height(x: np.ndarray, spec: TerrainSpec) -> np.ndarray:
    run = np.clip(x - spec.ramp_start, 0.0, spec.ramp_length)
    return run * math.tan(math.radians(spec.slope_deg))


def _wall(spec: TerrainSpec, rng, density, ground_fn):
    """Points on the top and both faces of a wall band with one gap."""
    w, h = spec.extent
    wx = spec.wall_x if spec.wall_x is not None else w / 2
    gy = spec.gap_y if spec.gap_y is not None else h / 2
    x0, x1 = wx - spec.wall_thickness / 2, wx + spec.wall_thickness / 2
    g0, g1 = gy - spec.gap_width / 2, gy + spec.gap_width / 2
    spacing = 1.0 / math.sqrt(density)
    pts = []
    # top
    top = _grid((spec.wall_thickness, h), density, rng, spec.jitter)
    top[:, 0] += x0
    top = top[(top[:, 1] < g0) | (top[:, 1] > g1)]
    zt = ground_fn(top) + spec.wall_height
    pts.append(np.column_stack([top, zt]))
    # faces (both sides, plus the two faces lining the gap)
    nz = max(1, round(spec.wall_height / spacing))
    zs = (np.arange(nz) + 0.5) * spec.wall_height / nz
    ys = (np.arange(round(h / spacing)) + 0.5) * spacing
    ys = ys[(ys < g0) | (ys > g1)]
    for fx in (x0, x1):
        yy, zz = np.meshgrid(ys, zs, indexing="ij")
        xy = np.column_stack([np.full(yy.size, fx), yy.ravel()])
        pts.append(np.column_stack([xy, ground_fn(xy) + zz.ravel()]))
    xs = x0 + (np.arange(max(1, round(spec.wall_thickness / spacing))) + 0.5) * spacing
    for fy in (g0, g1):
        xx, zz = np.meshgrid(xs, zs, indexing="ij")
        xy = np.column_stack([xx.ravel(), np.full(xx.size, fy)])
        pts.append(np.column_stack([xy, ground_fn(xy) + zz.ravel()]))
    return np.vstack(pts), (x0, x1, g0, g1)


def default_deck_bounds(spec: TerrainSpec) -> tuple[float, float, float, float]:
    w, h = spec.extent
    return spec.deck_bounds or (0.45 * w, 0.75 * w, 0.3 * h, 0.7 * h)


def generate_terrain(spec: TerrainSpec) -> PointCloud:
    """Deterministic point cloud for ``spec``.

    * flat: z = 0.
    * hills: seeded Gaussian bumps.
    * ramp: flat, then an incline of ``slope_deg`` along +x, then a plateau.
    * wall-gap: flat ground and a raised wall band across x with one gap.
    * pier-overlap: flat ground plus a thin elevated deck covering part of it;
      the ground under the deck is kept, as a lidar map would see it.
    * mixed: hills with a wall-gap band.
    """
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0]))
    xy = _grid(spec.extent, spec.density, rng, spec.jitter)

    def ground(q):
        if spec.kind in ("hills", "mixed"):
            return hills_height(q, spec)
        if spec.kind == "ramp":
            return _ramp_height(q[:, 0], spec)
        return np.zeros(len(q))

    parts = []
    if spec.kind in ("wall-gap", "mixed"):
        wall_pts, (x0, x1, g0, g1) = _wall(spec, rng, spec.density, ground)
        under = (xy[:, 0] >= x0) & (xy[:, 0] <= x1) & ((xy[:, 1] < g0) | (xy[:, 1] > g1))
        xy = xy[~under]
        parts.append(np.column_stack([xy, ground(xy)]))
        parts.append(wall_pts)
    else:
        parts.append(np.column_stack([xy, ground(xy)]))

    if spec.kind == "pier-overlap":
        x0, x1, y0, y1 = default_deck_bounds(spec)
        deck = _grid((x1 - x0, y1 - y0), spec.density, rng, spec.jitter)
        deck += (x0, y0)
        parts.append(np.column_stack([deck, np.full(len(deck), spec.deck_height)]))

    pts = np.vstack(parts)
    if spec.noise > 0:
        pts[:, 2] += rng.normal(0.0, spec.noise, len(pts))
    return PointCloud(pts)
