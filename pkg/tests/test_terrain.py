import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surfelnav.errors import InvalidConfig
from surfelnav.surfel_map import build_volume
from surfelnav.terrain import TERRAIN_KINDS, TerrainSpec, default_deck_bounds, generate_terrain


def test_flat_point_count():
    cloud = generate_terrain(TerrainSpec("flat", extent=(20.0, 20.0), density=25.0))
    assert abs(len(cloud) - 10_000) <= 200
    assert np.all(cloud.points[:, 2] == 0.0)


def test_ramp_surfel_tilt():
    spec = TerrainSpec("ramp", extent=(30.0, 10.0), slope_deg=30.0, ramp_start=8.0, ramp_length=12.0)
    vol = build_volume(generate_terrain(spec))
    x = vol.ground_positions[:, 0]
    # well inside the incline, away from the two kinks
    inner = (x > 10.0) & (x < 18.0)
    assert inner.sum() > 20
    tilts = np.array([vol.surfels[i].critics.tilt for i in np.flatnonzero(inner)])
    np.testing.assert_allclose(tilts, math.pi / 6, atol=0.02)


def test_pier_has_two_layers():
    spec = TerrainSpec("pier-overlap", extent=(30.0, 20.0))
    pts = generate_terrain(spec).points
    x0, x1, y0, y1 = default_deck_bounds(spec)
    probe = np.array([0.5 * (x0 + x1), 0.5 * (y0 + y1)])
    near = pts[np.linalg.norm(pts[:, :2] - probe, axis=1) < 0.5]
    zs = np.unique(np.round(near[:, 2], 9))
    assert set(zs) == {0.0, spec.deck_height}
    # outside the deck only the ground remains
    far = pts[np.linalg.norm(pts[:, :2] - [2.0, 2.0], axis=1) < 0.5]
    assert np.all(far[:, 2] == 0.0)


def test_wall_gap_shape():
    spec = TerrainSpec("wall-gap", extent=(20.0, 20.0), gap_width=2.0, wall_height=1.5)
    pts = generate_terrain(spec).points
    band = pts[np.abs(pts[:, 0] - 10.0) < 0.4]
    in_gap = np.abs(band[:, 1] - 10.0) < 0.9
    assert np.all(band[in_gap, 2] == 0.0)
    assert np.isclose(band[~in_gap, 2].max(), 1.5)


def test_hills_are_bumpy():
    spec = TerrainSpec("hills", extent=(30.0, 30.0), hill_count=10, seed=2)
    z = generate_terrain(spec).points[:, 2]
    assert z.max() - z.min() > 1.0


@pytest.mark.parametrize("kind", TERRAIN_KINDS)
def test_deterministic(kind):
    spec = TerrainSpec(kind, extent=(12.0, 12.0), noise=0.01, jitter=0.3, seed=5)
    a, b = generate_terrain(spec), generate_terrain(spec)
    assert a == b
    assert a != generate_terrain(TerrainSpec(kind, extent=(12.0, 12.0), noise=0.01, jitter=0.3, seed=6))


@given(st.floats(2.0, 15.0), st.floats(2.0, 15.0), st.floats(1.0, 30.0))
def test_points_inside_extent(w, h, density):
    pts = generate_terrain(TerrainSpec("flat", extent=(w, h), density=density, jitter=0.5)).points
    assert np.all((pts[:, 0] >= 0) & (pts[:, 0] <= w) & (pts[:, 1] >= 0) & (pts[:, 1] <= h))


def test_invalid_specs():
    with pytest.raises(InvalidConfig):
        TerrainSpec("volcano")
    with pytest.raises(InvalidConfig):
        TerrainSpec("flat", extent=(0.0, 5.0))
    with pytest.raises(InvalidConfig):
        TerrainSpec("flat", density=-1.0)
