"""Surfel-based elevation state-space mapping and sampling-based planning on uneven terrain."""

from .errors import SurfelNavError
from .pointcloud_io import PointCloud, colorize_by_cost, load_cloud, save_cloud
from .spatial_index import SpatialIndex, build_index, radius_query, voxel_downsample
from .surfel_map import (
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
from .state_space import ElevationState, ElevationStateSpace, MotionModel, SamplerConfig, SpaceParams
from .dubins import dubins_shortest_path
from .planners import PlannerConfig, PlanningProblem, PlanResult, plan, prm_star, rrt_star
from .bench import BenchmarkReport, generate_problems, run_benchmark
from .terrain import TerrainSpec, generate_terrain

__version__ = "0.1.0"
