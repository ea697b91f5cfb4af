"""Gathering strategies for limited-visibility swarms and their engines.

All strategies are local: a robot only ever sees the points of its visible
neighborhood (itself included) and computes from that snapshot alone.  The
synchronous engine runs look-compute-move rounds where every robot jumps to
its target simultaneously; the continuous engine integrates velocity fields
with explicit Euler steps, never letting a robot overshoot its target.
"""

from __future__ import annotations

import math

import numpy as np

from . import analysis, geometry, swarm

# A computed move direction shorter than this counts as "already there".
DIRECTION_TOL = 1e-12
# Radius of the per-neighbor movement limit balls.
LIMIT_RADIUS = 0.5


def neighborhood_points(
    i: int, config: swarm.Configuration, graph: swarm.VisibilityGraph
) -> np.ndarray:
    """Positions visible to robot i (itself included), canonically sorted.

    The lexicographic sort makes the result a pure function of the point
    set, so robots sharing a neighborhood compute bitwise-identical values
    downstream regardless of index order.
    """
    pts = config.positions[[i, *graph.neighbors[i]]]
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))
    return pts[order]


def local_center(
    i: int, config: swarm.Configuration, graph: swarm.VisibilityGraph
) -> np.ndarray:
    """Center of the smallest enclosing ball of robot i's neighborhood."""
    center, _ = geometry.enclosing_ball(neighborhood_points(i, config, graph))
    return center


# ---------------------------------------------------------------------------
# synchronous go-to-center
# ---------------------------------------------------------------------------


def gtc3d_target(
    i: int, config: swarm.Configuration, graph: swarm.VisibilityGraph
) -> np.ndarray:
    """Target point of robot i for one synchronous go-to-center round.

    The robot heads for the center of the smallest enclosing ball of its
    neighborhood, but stops where it first exits one of the limit balls of
    radius 1/2 centered on the midpoints to its neighbors (its own limit
    ball caps the move at 1/2).  Capped at the center itself, the move ends
    exactly on it, which keeps merges exact.
    """
    p = config.positions[i]
    center = local_center(i, config, graph)
    offset = center - p
    dist = float(np.linalg.norm(offset))
    if dist <= DIRECTION_TOL:
        return p.copy()
    direction = offset / dist
    cap = LIMIT_RADIUS  # exit length of the robot's own limit ball
    for j in graph.neighbors[i]:
        mid = 0.5 * (p + config.positions[j])
        ball = geometry.Sphere(center=mid, radius=LIMIT_RADIUS)
        cap = min(cap, geometry.ray_ball_exit(p, direction, ball))
    if dist <= cap:
        return center.copy()
    return p + cap * direction


class GoToCenter:
    """Synchronous go-to-center strategy (one jump per round)."""

    label = "gtc3d"
    kind = "fsync"

    def target(self, i, config, graph) -> np.ndarray:
        return gtc3d_target(i, config, graph)


# ---------------------------------------------------------------------------
# continuous go-to-center
# ---------------------------------------------------------------------------


def gtc3d_cont_velocity(
    i: int, config: swarm.Configuration, graph: swarm.VisibilityGraph
) -> np.ndarray:
    """Unit velocity toward the local enclosing-ball center (zero if there)."""
    velocity, _, _ = GoToCenterContinuous().plan(i, config, graph)
    return velocity


class GoToCenterContinuous:
    """Continuous go-to-center: unit speed toward the local ball center."""

    label = "gtc3d-cont"
    kind = "continuous"

    def plan(self, i, config, graph):
        """(velocity, distance to target, exact target) for one robot.

        The engine uses the distance to clamp the Euler step so the robot
        lands exactly on the target instead of overshooting it.
        """
        p = config.positions[i]
        center = local_center(i, config, graph)
        offset = center - p
        dist = float(np.linalg.norm(offset))
        if dist <= DIRECTION_TOL:
            return np.zeros(3), 0.0, p.copy()
        return offset / dist, dist, center.copy()

    def velocity(self, i, config, graph) -> np.ndarray:
        return self.plan(i, config, graph)[0]


# ---------------------------------------------------------------------------
# move on the angle minimizer
# ---------------------------------------------------------------------------


def angle_minimizer(vectors) -> np.ndarray:
    """Unit vector minimizing the largest angle to the given nonzero vectors.

    The minimizer is the normalized center of the smallest enclosing ball
    of the normalized input vectors.  Inputs that do not fit in an open
    half-space have no direction at an acute angle to all of them; that
    degenerate case is rejected.  The precondition is validated on the
    output: the candidate (or, on numerical failure, a mean-direction
    fallback) must keep every angle below pi/2 - 1e-9.
    """
    vs = geometry.as_points(vectors)
    norms = np.linalg.norm(vs, axis=1)
    if np.any(norms <= DIRECTION_TOL):
        raise ValueError("angle minimizer of a zero vector is undefined")
    tips = vs / norms[:, None]
    center, _ = geometry.enclosing_ball(tips)
    center_norm = float(np.linalg.norm(center))
    limit = 0.5 * math.pi - analysis.RIGHT_ANGLE_MARGIN
    candidates = []
    if center_norm > 1e-9:
        candidates.append(center / center_norm)
    mean = tips.mean(axis=0)
    mean_norm = float(np.linalg.norm(mean))
    if mean_norm > DIRECTION_TOL:
        candidates.append(mean / mean_norm)
    for candidate in candidates:
        worst = max(geometry.angle_between(candidate, t) for t in tips)
        if worst < limit:
            return candidate
    raise ValueError("vectors do not fit in an open half-space; no angle minimizer")


def moam_velocity(
    i: int, config: swarm.Configuration, graph: swarm.VisibilityGraph
) -> np.ndarray:
    """Velocity of robot i under the move-on-angle-minimizer strategy.

    Only corners of the local hull move: at unit speed along the angle
    minimizer of the edge vectors toward their hull-adjacent neighbors.
    Points interior to their local hull (or whose neighborhood collapses
    to a single point) stay put.
    """
    pts = neighborhood_points(i, config, graph)
    hull = geometry.convex_hull(pts)
    if hull.dimensionality == 0:
        return np.zeros(3)
    p = config.positions[i]
    match = np.nonzero((hull.vertices == p).all(axis=1))[0]
    if match.size == 0:
        return np.zeros(3)
    vi = int(match[0])
    edges = [hull.vertices[j] - p for j in hull.adjacency[vi]]
    return angle_minimizer(edges)


class MoveOnAngleMinimizer:
    """Continuous strategy: hull corners slide along their angle minimizer."""

    label = "moam"
    kind = "continuous"

    def plan(self, i, config, graph):
        return moam_velocity(i, config, graph), math.inf, None

    def velocity(self, i, config, graph) -> np.ndarray:
        return self.plan(i, config, graph)[0]


STRATEGIES = {
    cls.label: cls for cls in (GoToCenter, GoToCenterContinuous, MoveOnAngleMinimizer)
}


# ---------------------------------------------------------------------------
# engines
# ---------------------------------------------------------------------------


def _fsync_round(config: swarm.Configuration, strategy):
    graph = swarm.visibility_graph(config)
    targets = np.array(
        [strategy.target(i, config, graph) for i in range(config.n_live)]
    )
    moved = swarm.Configuration(targets, config.multiplicities, config.time + 1.0)
    merged, merges, remap = swarm._merge_with_map(moved)
    return merged, targets, merges, remap


def step_fsync(config: swarm.Configuration, strategy) -> swarm.Configuration:
    """One synchronous round: everyone computes, everyone jumps, merge."""
    merged, _, _, _ = _fsync_round(config, strategy)
    return merged


def run_fsync(
    config: swarm.Configuration,
    strategy,
    max_rounds: int,
    gather_tol: float = 0.0,
) -> analysis.Trace:
    """Run synchronous rounds until gathered or the round budget runs out.

    The initial configuration must have a connected visibility graph.  The
    returned trace records, per round, the snapshot and the targets it
    produced; an exhausted budget is reported as gathered=False rather
    than raised.
    """
    if strategy.kind != "fsync":
        raise ValueError(f"strategy {strategy.label!r} is not synchronous")
    if not swarm.is_connected(swarm.visibility_graph(config)):
        raise ValueError("initial configuration must be connected")
    trace = analysis.Trace(
        strategy=strategy.label,
        kind="fsync",
        dt=1.0,
        gather_tol=gather_tol,
        initial_diameter=swarm.diameter(config),
        gathered=False,
    )
    current = config
    merges, remap = 0, None
    rounds = 0
    while True:
        if swarm.gathered(current, gather_tol):
            trace.gathered = True
            trace.entries.append(
                analysis.TraceEntry(current.time, current, None, merges, remap)
            )
            break
        if rounds >= max_rounds:
            trace.entries.append(
                analysis.TraceEntry(current.time, current, None, merges, remap)
            )
            break
        nxt, targets, nxt_merges, nxt_remap = _fsync_round(current, strategy)
        trace.entries.append(
            analysis.TraceEntry(current.time, current, targets, merges, remap)
        )
        current, merges, remap = nxt, nxt_merges, nxt_remap
        rounds += 1
    trace.validate()
    return trace


def integrate(
    config: swarm.Configuration,
    strategy,
    dt: float,
    max_time: float,
    gather_tol: float = 1e-3,
) -> analysis.Trace:
    """Integrate a continuous strategy with explicit Euler steps.

    Per step, every robot gets displacement dt * velocity computed from the
    shared snapshot, clamped so it never overshoots the strategy's target
    point (robots land exactly on the target when they would pass it).
    Stops when the swarm diameter drops to gather_tol or max_time is
    reached; the latter is reported as gathered=False.
    """
    if strategy.kind != "continuous":
        raise ValueError(f"strategy {strategy.label!r} is not continuous")
    if dt <= 0.0 or not np.isfinite(dt):
        raise ValueError("dt must be a positive finite step")
    if max_time <= 0.0:
        raise ValueError("max_time must be positive")
    if not swarm.is_connected(swarm.visibility_graph(config)):
        raise ValueError("initial configuration must be connected")
    trace = analysis.Trace(
        strategy=strategy.label,
        kind="continuous",
        dt=dt,
        gather_tol=gather_tol,
        initial_diameter=swarm.diameter(config),
        gathered=False,
    )
    start_time = config.time
    steps = max(1, int(math.ceil(max_time / dt - 1e-9)))
    current = config
    merges, remap = 0, None
    for k in range(steps + 1):
        if swarm.gathered(current, gather_tol):
            trace.gathered = True
            trace.entries.append(
                analysis.TraceEntry(current.time, current, None, merges, remap)
            )
            break
        if k == steps:
            trace.entries.append(
                analysis.TraceEntry(current.time, current, None, merges, remap)
            )
            break
        graph = swarm.visibility_graph(current)
        m = current.n_live
        velocities = np.zeros((m, 3))
        new_positions = np.empty((m, 3))
        for i in range(m):
            velocity, limit, snap = strategy.plan(i, current, graph)
            velocities[i] = velocity
            speed = float(np.linalg.norm(velocity))
            if speed <= DIRECTION_TOL:
                new_positions[i] = current.positions[i]
            elif snap is not None and limit <= dt * speed:
                new_positions[i] = snap
            else:
                new_positions[i] = current.positions[i] + dt * velocity
        trace.entries.append(
            analysis.TraceEntry(current.time, current, velocities, merges, remap)
        )
        moved = swarm.Configuration(
            new_positions, current.multiplicities, start_time + (k + 1) * dt
        )
        current, merges, remap = swarm._merge_with_map(moved)
    trace.validate()
    return trace
