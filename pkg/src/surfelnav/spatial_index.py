"""Radius / nearest-neighbour queries and voxel-grid downsampling."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .errors import NonPositiveRadius, NonPositiveVoxelSize
from .pointcloud_io import PointCloud


class SpatialIndex:
    """Immutable k-d tree over a fixed 3D point set.

    Results are exact: every query returns what a linear scan would.
    """

    def __init__(self, points):
        pts = np.asarray(points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        self._points = pts
        self._points.setflags(write=False)
        self._tree = cKDTree(pts) if len(pts) else None

    @property
    def points(self) -> np.ndarray:
        return self._points

    def __len__(self) -> int:
        return len(self._points)

    def radius_query(self, center, r: float) -> np.ndarray:
        """Indices of points within distance ``r`` (inclusive), nearest first.

        Ties in distance are broken by point index.
        """
        if not r > 0:
            raise NonPositiveRadius(f"radius must be positive, got {r}")
        if self._tree is None:
            return np.empty(0, dtype=np.intp)
        c = np.asarray(center, dtype=np.float64)
        # cKDTree's bound is inclusive up to rounding; filter with the exact test
        cand = np.asarray(self._tree.query_ball_point(c, r * (1.0 + 1e-12) + 1e-15), dtype=np.intp)
        if cand.size == 0:
            return cand
        d = np.linalg.norm(self._points[cand] - c, axis=1)
        keep = d <= r
        cand, d = cand[keep], d[keep]
        order = np.lexsort((cand, d))
        return cand[order]

    def radius_query_many(self, centers, r: float) -> list[np.ndarray]:
        if not r > 0:
            raise NonPositiveRadius(f"radius must be positive, got {r}")
        centers = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
        if self._tree is None:
            return [np.empty(0, dtype=np.intp) for _ in range(len(centers))]
        return [self.radius_query(c, r) for c in centers]

    def nearest(self, center) -> tuple[int, float] | None:
        """(index, distance) of the closest point, or None on an empty index."""
        if self._tree is None:
            return None
        d, i = self._tree.query(np.asarray(center, dtype=np.float64), k=1)
        return int(i), float(d)


def build_index(points) -> SpatialIndex:
    return SpatialIndex(points)


def radius_query(index: SpatialIndex, center, r: float) -> np.ndarray:
    return index.radius_query(center, r)


def voxel_keys(points: np.ndarray, voxel_size: float, anchor: np.ndarray) -> np.ndarray:
    return np.floor((points - anchor) / voxel_size).astype(np.int64)


def voxel_downsample(cloud: PointCloud, voxel_size: float) -> PointCloud:
    """Replace the points of each occupied voxel by their centroid.

    The grid has pitch ``voxel_size`` and is anchored at the cloud's minimum
    corner. Output points are ordered by voxel key (x-major), which keeps the
    result independent of input order up to float summation.
    """
    if not voxel_size > 0:
        raise NonPositiveVoxelSize(f"voxel size must be positive, got {voxel_size}")
    pts = cloud.points
    if len(pts) == 0:
        return PointCloud(np.empty((0, 3)), None if cloud.colors is None else np.empty((0, 3)))
    keys = voxel_keys(pts, voxel_size, pts.min(axis=0))
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    counts = np.bincount(inverse, minlength=len(uniq)).astype(np.float64)
    centroids = np.empty((len(uniq), 3))
    for axis in range(3):
        centroids[:, axis] = np.bincount(inverse, weights=pts[:, axis], minlength=len(uniq)) / counts
    colors = None
    if cloud.colors is not None:
        colors = np.empty((len(uniq), 3))
        for axis in range(3):
            colors[:, axis] = np.bincount(inverse, weights=cloud.colors[:, axis],
                                          minlength=len(uniq)) / counts
        colors = np.rint(colors).astype(np.uint8)
    return PointCloud(centroids, colors)
