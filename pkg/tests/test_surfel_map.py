import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surfelnav.errors import (
    AllZeroWeights,
    DegenerateGeometry,
    EmptyCloud,
    EmptyNeighborhood,
    InsufficientPoints,
    NoTraversableSurfels,
)
from surfelnav.pointcloud_io import PointCloud
from surfelnav.surfel_map import (
    CostConfig,
    CriticValues,
    ElevationVolume,
    MapConfig,
    Surfel,
    build_surfel_set,
    build_volume,
    compute_critics,
    elevate_and_stack,
    fit_plane_ransac,
    regress_cost,
)

from oracles import patch_suite, tilted_patch


def lstsq_normal(pts):
    # independent oracle: smallest right singular vector of the centred points
    c = pts - pts.mean(axis=0)
    n = np.linalg.svd(c)[2][-1]
    return n if n[2] >= 0 else -n


def test_horizontal_plane():
    rng = np.random.default_rng(1)
    pts = np.column_stack([rng.random(20), rng.random(20), np.zeros(20)])
    plane = fit_plane_ransac(pts, seed=0)
    np.testing.assert_allclose(plane, (0, 0, 1, 0), atol=1e-12)


def test_noisy_oblique_plane():
    rng = np.random.default_rng(2)
    xy = rng.uniform(-1, 1, (200, 2))
    pts = np.column_stack([xy, 1 - xy.sum(axis=1)])
    pts += rng.normal(0, 0.01, pts.shape)
    a, b, c, _ = fit_plane_ransac(pts, seed=3)
    target = np.ones(3) / math.sqrt(3)
    angle = math.degrees(math.acos(min(1.0, abs(np.dot([a, b, c], target)))))
    assert angle < 1.0
    # and agrees with a least-squares fit over the same points
    assert abs(np.dot([a, b, c], lstsq_normal(pts))) > math.cos(math.radians(1.0))


def test_ransac_rejects_outliers():
    pts, plane, _ = tilted_patch(0.3, -0.1, outliers=[(0.0, 0.0, 2.0), (0.2, 0.1, -3.0)])
    got = fit_plane_ransac(pts, iterations=100, inlier_threshold=0.05, seed=0)
    np.testing.assert_allclose(got, plane, atol=1e-9)


def test_ransac_input_errors():
    with pytest.raises(InsufficientPoints):
        fit_plane_ransac([[0, 0, 0], [1, 1, 1]])
    with pytest.raises(DegenerateGeometry):
        fit_plane_ransac([[t, 2 * t, 3 * t] for t in range(10)])


def test_ransac_deterministic():
    rng = np.random.default_rng(5)
    pts = rng.normal(size=(50, 3)) * [1, 1, 0.1]
    assert fit_plane_ransac(pts, seed=9) == fit_plane_ransac(pts, seed=9)


@given(st.floats(-1.2, 1.2), st.floats(-1.2, 1.2))
def test_plane_orientation_convention(pitch, roll):
    pts, _, _ = tilted_patch(pitch, roll)
    a, b, c, _ = fit_plane_ransac(pts, seed=0)
    assert c >= 0
    assert abs(math.sqrt(a * a + b * b + c * c) - 1) < 1e-12


def test_flat_critics_zero():
    pts = np.column_stack([np.arange(5.0), np.zeros(5), np.zeros(5)])
    c = compute_critics((0, 0, 1, 0), pts)
    assert c.as_tuple() == (0.0, 0.0, 0.0, 0.0)


def test_tilt_thirty_degrees():
    n = (math.sin(math.pi / 6), 0.0, math.cos(math.pi / 6))
    pts, plane, _ = tilted_patch(math.pi / 6, 0.0)
    c = compute_critics((*n, plane[3]), pts)
    assert abs(c.tilt - math.pi / 6) < 1e-9


def test_single_bump():
    pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0.5]], dtype=float)
    c = compute_critics((0, 0, 1, 0), pts)
    assert abs(c.height_diff - 0.5) < 1e-9
    assert abs(c.ground_clearance - 0.5) < 1e-9
    assert abs(c.roughness - 0.125) < 1e-9


def test_ground_clearance_counts_points_below():
    pts = np.array([[0, 0, 0], [1, 0, -0.4], [0, 1, 0.1]], dtype=float)
    assert abs(compute_critics((0, 0, 1, 0), pts).ground_clearance - 0.4) < 1e-12


def test_empty_neighbourhood():
    with pytest.raises(EmptyNeighborhood):
        compute_critics((0, 0, 1, 0), np.empty((0, 3)))


@pytest.mark.parametrize("case", range(24))
def test_critic_closed_forms(case):
    pts, plane, expected = patch_suite()[case]
    c = compute_critics(plane, pts)
    for k, v in expected.items():
        assert abs(getattr(c, k) - v) < 1e-9, k


@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0),
       st.lists(st.tuples(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-1, 1)), max_size=6))
def test_roughness_is_mean_point_plane_distance(pitch, roll, outs):
    pts, plane, _ = tilted_patch(pitch, roll, outliers=outs)
    a, b, c, d = plane
    brute = np.mean([abs(a * x + b * y + c * z + d) / math.sqrt(a * a + b * b + c * c) for x, y, z in pts])
    assert abs(compute_critics(plane, pts).roughness - brute) < 1e-9


def test_cost_zero_case():
    assert regress_cost(CriticValues(0, 0, 0, 0), CostConfig()) == (0.0, True)


def test_default_weights():
    assert CostConfig().weights == (0.25, 0.25, 0.25, 0.25)
    assert CostConfig().max_cost == 255.0


def test_over_range_tilt_blocks():
    cfg = CostConfig()
    cost, ok = regress_cost(CriticValues(1.2 * cfg.max_tilt, 0, 0, 0), cfg)
    assert not ok
    assert cost == pytest.approx(255.0 * 0.25)


def test_cost_formula():
    cfg = CostConfig(w_tilt=1, w_roughness=2, w_height_diff=3, w_ground_clearance=4,
                     max_tilt=0.5, max_roughness=0.1, max_height_diff=1.0, max_ground_clearance=0.2)
    cost, ok = regress_cost(CriticValues(0.25, 0.05, 0.1, 0.3), cfg)
    expected = 255 * (1 * 0.5 + 2 * 0.5 + 3 * 0.1 + 4 * 1.0) / 10
    assert cost == pytest.approx(expected, abs=1e-12)
    assert not ok  # ground clearance above its range


def test_all_zero_weights():
    with pytest.raises(AllZeroWeights):
        regress_cost(CriticValues(0, 0, 0, 0),
                     CostConfig(w_tilt=0, w_roughness=0, w_height_diff=0, w_ground_clearance=0))


critic_values = st.tuples(st.floats(0, 1.5), st.floats(0, 0.2), st.floats(0, 2), st.floats(0, 0.5))
weights = st.tuples(*[st.floats(0.01, 5)] * 4)


@given(critic_values, weights, st.integers(0, 3), st.floats(0, 1))
def test_cost_monotone_in_each_critic(values, w, k, bump):
    cfg = CostConfig(*w)
    bigger = list(values)
    bigger[k] += bump
    assert regress_cost(CriticValues(*bigger), cfg)[0] >= regress_cost(CriticValues(*values), cfg)[0] - 1e-12


@given(critic_values, weights)
def test_cost_weight_scale_invariant(values, w):
    a = regress_cost(CriticValues(*values), CostConfig(*w))
    b = regress_cost(CriticValues(*values), CostConfig(*[2 * x for x in w]))
    assert a[1] == b[1] and abs(a[0] - b[0]) < 1e-9
    assert 0 <= a[0] <= 255


def flat_plane_cloud(extent=10.0, spacing=0.1):
    u = (np.arange(round(extent / spacing)) + 0.5) * spacing
    gx, gy = np.meshgrid(u, u, indexing="ij")
    return PointCloud(np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)]))


def test_flat_plane_surfels():
    surfels = build_surfel_set(flat_plane_cloud(), 1.0)
    assert len(surfels) == 100
    for s in surfels:
        assert s.critics.tilt < 1e-6
        assert s.traversable
        assert s.radius == 0.5
        assert abs(np.linalg.norm(s.normal) - 1) < 1e-9 and s.normal[2] >= 0


def test_isolated_point_dropped():
    cloud = PointCloud(np.vstack([flat_plane_cloud(4.0).points, [[50.0, 50.0, 0.0]]]))
    surfels = build_surfel_set(cloud, 1.0)
    assert len(surfels) == 16
    assert all(s.position[0] < 10 for s in surfels)


def test_empty_cloud():
    with pytest.raises(EmptyCloud):
        build_surfel_set(PointCloud(np.empty((0, 3))), 1.0)


def test_surfel_set_deterministic():
    rng = np.random.default_rng(0)
    pts = flat_plane_cloud(5.0).points + rng.normal(0, 0.02, (2500, 3))
    a = build_surfel_set(PointCloud(pts), 1.0, seed=4)
    b = build_surfel_set(PointCloud(pts), 1.0, seed=4)
    assert a == b


def surfel(pos, normal, cost=10.0, ok=True):
    return Surfel(pos, normal, 0.5, CriticValues(0, 0, 0, 0), cost, ok)


def test_elevation_examples():
    vol = elevate_and_stack([surfel((0, 0, 0), (0, 0, 1))], 0.5, 0.2, 3)
    np.testing.assert_allclose(vol.positions[0], (0, 0, 0.5))
    vol = elevate_and_stack([surfel((1, 2, 3), (0, 0.6, 0.8))], 1.0, 0.2, 3)
    np.testing.assert_allclose(vol.positions[0], (1, 2.6, 3.8))


def test_waffle_layers():
    vol = elevate_and_stack([surfel((1, 2, 3), (0, 0.6, 0.8), cost=42.0)], 0.4, 0.2, 5)
    layers = vol.waffle(0)
    assert len(layers) == 5
    steps = np.diff(layers, axis=0)
    np.testing.assert_allclose(steps, np.tile([0, 0.12, 0.16], (4, 1)), atol=1e-12)
    np.testing.assert_allclose(layers[0], vol.positions[0])
    base = vol.surfel(0)
    for k in range(5):
        # every layer shares normal, radius, and cost with its base
        assert np.allclose(np.cross(layers[k] - np.array([1, 2, 3]), base.normal), 0)
    assert base.cost == 42.0 and base.radius == 0.5


def test_no_traversable_surfels():
    with pytest.raises(NoTraversableSurfels):
        elevate_and_stack([surfel((0, 0, 0), (0, 0, 1), ok=False)], 0.4, 0.2, 3)


def test_elevated_distance_to_source_plane():
    rng = np.random.default_rng(3)
    cloud = PointCloud(flat_plane_cloud(6.0).points + rng.normal(0, 0.03, (3600, 3)) * [0, 0, 1])
    surfels = build_surfel_set(cloud, 1.0)
    vol = elevate_and_stack(surfels, 0.4, 0.2, 5)
    for s, p in zip(surfels, vol.positions):
        n = np.array(s.normal)
        assert abs(np.dot(p - np.array(s.position), n) - 0.4) < 1e-9


def test_stack_count_default():
    assert MapConfig(robot_height=1.0, step_size=0.2).effective_stack_count == 5
    assert MapConfig(robot_height=1.1, step_size=0.2).effective_stack_count == 6


def test_volume_json_round_trip(flat_volume):
    doc = json.loads(flat_volume.to_json())
    back = ElevationVolume.from_dict(doc)
    assert back.to_json() == flat_volume.to_json()
    np.testing.assert_array_equal(back.positions, flat_volume.positions)


def test_build_volume_deterministic():
    rng = np.random.default_rng(8)
    cloud = PointCloud(flat_plane_cloud(5.0).points + rng.normal(0, 0.02, (2500, 3)))
    assert build_volume(cloud).to_json() == build_volume(cloud).to_json()
