import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from surfelnav.errors import NonPositiveRadius, NonPositiveVoxelSize
from surfelnav.pointcloud_io import PointCloud
from surfelnav.spatial_index import build_index, radius_query, voxel_downsample


def brute_force(points, center, r):
    d = np.linalg.norm(points - np.asarray(center), axis=1)
    return set(np.flatnonzero(d <= r).tolist())


def test_empty_index():
    idx = build_index(np.empty((0, 3)))
    assert len(radius_query(idx, [0, 0, 0], 1.0)) == 0
    assert idx.nearest([0, 0, 0]) is None


def test_singleton_nearest():
    idx = build_index([[1.0, 2.0, 3.0]])
    assert idx.nearest([50.0, -4.0, 0.0])[0] == 0


def test_self_inclusion_first():
    pts = np.array([[0.0, 0, 0], [0.1, 0, 0], [0.05, 0, 0]])
    res = radius_query(build_index(pts), pts[1], 1.0)
    assert res[0] == 1


def test_boundary_threshold():
    pts = np.array([[0.4, 0.0, 0.0], [0.6, 0.0, 0.0]])
    assert radius_query(build_index(pts), [0, 0, 0], 0.5).tolist() == [0]
    # exactly on the sphere counts
    pts = np.array([[0.5, 0.0, 0.0], [0.0, 0.0, -0.5]])
    assert radius_query(build_index(pts), [0, 0, 0], 0.5).tolist() == [0, 1]


def test_ascending_distance_order():
    rng = np.random.default_rng(0)
    pts = rng.random((500, 3))
    c = np.array([0.5, 0.5, 0.5])
    res = radius_query(build_index(pts), c, 0.3)
    d = np.linalg.norm(pts[res] - c, axis=1)
    assert np.all(np.diff(d) >= 0)


@pytest.mark.parametrize("n,probes", [(1000, 50), (10000, 100)])
def test_matches_linear_scan(n, probes):
    rng = np.random.default_rng(n)
    pts = rng.uniform(-5, 5, (n, 3))
    idx = build_index(pts)
    for c in rng.uniform(-6, 6, (probes, 3)):
        r = float(rng.uniform(0.1, 2.0))
        assert set(radius_query(idx, c, r).tolist()) == brute_force(pts, c, r)


coord = st.floats(-10, 10, allow_nan=False)


@given(arrays(np.float64, st.tuples(st.integers(0, 200), st.just(3)), elements=coord),
       st.tuples(coord, coord, coord), st.floats(0.01, 8.0))
def test_query_oracle_property(pts, center, r):
    assert set(radius_query(build_index(pts), center, r).tolist()) == brute_force(pts, center, r)


def test_nonpositive_radius():
    idx = build_index([[0.0, 0.0, 0.0]])
    for r in (0.0, -1.0):
        with pytest.raises(NonPositiveRadius):
            radius_query(idx, [0, 0, 0], r)


def test_voxel_singleton():
    out = voxel_downsample(PointCloud([[1.25, -3.5, 7.0]]), 1.0)
    np.testing.assert_array_equal(out.points, [[1.25, -3.5, 7.0]])


def test_voxel_cube_centroid():
    corners = np.array([[x, y, z] for x in (0.2, 0.7) for y in (0.2, 0.7) for z in (0.2, 0.7)])
    # anchor the grid so the cube sits inside one 1 m voxel
    cloud = PointCloud(np.vstack([corners, [[0.0, 0.0, 0.0]]]))
    out = voxel_downsample(cloud, 1.0)
    assert len(out) == 1
    np.testing.assert_allclose(out.points[0], (corners.sum(axis=0)) / 9)
    out = voxel_downsample(PointCloud(corners), 1.0)
    np.testing.assert_allclose(out.points, [[0.45, 0.45, 0.45]])


def test_voxel_disjoint():
    out = voxel_downsample(PointCloud([[0.0, 0, 0], [5.0, 0, 0]]), 1.0)
    assert len(out) == 2


def test_voxel_size_validation():
    with pytest.raises(NonPositiveVoxelSize):
        voxel_downsample(PointCloud([[0.0, 0, 0]]), 0.0)


@given(arrays(np.float64, st.tuples(st.integers(1, 300), st.just(3)), elements=st.floats(-20, 20)),
       st.floats(0.2, 5.0))
def test_one_point_per_voxel(pts, d):
    out = voxel_downsample(PointCloud(pts), d)
    anchor = pts.min(axis=0)
    keys = np.floor((pts - anchor) / d).astype(np.int64)
    assert len(out) == len(np.unique(keys, axis=0)) <= len(pts)
    again = voxel_downsample(out, d)
    assert len(again) <= len(out)
    # each centroid lies inside the bounding box of its voxel's points
    for p in out.points:
        assert np.all(p >= pts.min(axis=0) - 1e-9) and np.all(p <= pts.max(axis=0) + 1e-9)
