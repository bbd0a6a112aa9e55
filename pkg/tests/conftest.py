import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from surfelnav.state_space import ElevationStateSpace
from surfelnav.surfel_map import CriticValues, Surfel, build_volume, elevate_and_stack
from surfelnav.terrain import TerrainSpec, generate_terrain

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_volume(positions, costs=None, traversable=None, normals=None, elevation=0.4,
                voxel_size=1.0, max_cost=255.0, step_size=0.2, stack_count=5):
    """Volume straight from hand-placed surfels (no point cloud involved)."""
    positions = np.asarray(positions, dtype=float)
    n = len(positions)
    costs = np.zeros(n) if costs is None else np.asarray(costs, dtype=float)
    traversable = np.ones(n, bool) if traversable is None else np.asarray(traversable, bool)
    normals = np.tile([0.0, 0.0, 1.0], (n, 1)) if normals is None else np.asarray(normals, float)
    surfels = [
        Surfel(tuple(p), tuple(nv), voxel_size / 2, CriticValues(0.0, 0.0, 0.0, 0.0), float(c), bool(t))
        for p, nv, c, t in zip(positions.tolist(), normals.tolist(), costs, traversable)
    ]
    return elevate_and_stack(surfels, elevation, step_size, stack_count, voxel_size=voxel_size,
                             max_cost=max_cost)


def grid_positions(nx, ny, z=0.0, spacing=1.0, origin=(0.5, 0.5)):
    xs = origin[0] + spacing * np.arange(nx)
    ys = origin[1] + spacing * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, z)])


@pytest.fixture(scope="session")
def flat_volume():
    return build_volume(generate_terrain(TerrainSpec("flat", extent=(20.0, 20.0))))


@pytest.fixture(scope="session")
def flat_space(flat_volume):
    return ElevationStateSpace(flat_volume)


@pytest.fixture(scope="session")
def ramp_space():
    spec = TerrainSpec("ramp", extent=(30.0, 10.0), slope_deg=20.0, ramp_start=8.0, ramp_length=10.0)
    return ElevationStateSpace(build_volume(generate_terrain(spec)))


@pytest.fixture(scope="session")
def two_layer_space():
    # ground at z = 0 everywhere, a second surface at z = 5 over x in [4, 8)
    lower = grid_positions(12, 4)
    upper = grid_positions(4, 4, z=5.0, origin=(4.5, 0.5))
    return ElevationStateSpace(make_volume(np.vstack([lower, upper])))


# one line per acceptance criterion, repeated in the terminal summary
_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    def record(criterion: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
