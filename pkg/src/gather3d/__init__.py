"""Simulation and analysis toolkit for gathering limited-visibility robot
swarms in 3D Euclidean space."""

from .analysis import (
    CheckReport,
    Trace,
    TraceEntry,
    blocked_fraction,
    check_connectivity,
    check_contracting,
    check_length_decay,
    check_length_monotonic,
    check_tangential_normal,
    contracting_check,
    global_ses_radius,
    length_integral,
    min_projected_speed,
    projected_length,
    scaling_fit,
    tangential_normal_check,
)
from .generators import (
    circle_config,
    coplanar_embed,
    grid_config,
    line_config,
    random_connected,
)
from .geometry import (
    ConvexHullResult,
    PlaneBasis,
    Sphere,
    angle_between,
    convex_hull,
    enclosing_ball,
    hemisphere_directions,
    hemisphere_weight,
    hull_excess,
    plane_basis,
    planar_hull_length,
    project,
    project_points,
    ray_ball_exit,
    smallest_enclosing_sphere,
)
from .strategies import (
    STRATEGIES,
    GoToCenter,
    GoToCenterContinuous,
    MoveOnAngleMinimizer,
    angle_minimizer,
    gtc3d_cont_velocity,
    gtc3d_target,
    integrate,
    moam_velocity,
    neighborhood_points,
    run_fsync,
    step_fsync,
)
from .swarm import (
    Configuration,
    VisibilityGraph,
    diameter,
    gathered,
    is_connected,
    merge_coincident,
    visibility_graph,
)
from .tracefile import TRACE_FORMAT, read_trace, write_trace

__version__ = "0.1.0"
