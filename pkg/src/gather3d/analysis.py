"""Progress measures and invariant checkers over runs.

The central objects are the projected hull length of the swarm seen along a
direction, its integral over the upper hemisphere of directions, and the
per-step property checkers (connectivity preservation, the contracting
property, the tangential-normal property, and monotonicity/decay of the
projected length).  Checkers report normalized margins: a check fails iff
its worst margin exceeds the report tolerance, which sits at zero because
the per-property allowances are already folded into the margins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry, swarm

# Strict margin kept between velocities and local hull edges.
RIGHT_ANGLE_MARGIN = 1e-9
# Containment slack for the contracting probe point.
INSIDE_SLACK = 1e-9
# Forward-probe length as a fraction of the swarm diameter.
PROBE_SCALE = 1e-6
# Two live points projecting closer than this make a step ineligible for
# the projected-length decay bound.
PROJECTION_CLASH_TOL = 1e-6


@dataclass(frozen=True)
class TraceEntry:
    """One recorded instant: the snapshot, the moves computed from it, and
    how the snapshot arose from its predecessor (merge count and index remap)."""

    time: float
    config: swarm.Configuration
    moves: np.ndarray | None
    merges: int = 0
    remap: np.ndarray | None = None


@dataclass
class Trace:
    """Recorded run of a strategy.

    kind is "fsync" (moves hold per-round target points, dt is the round
    length 1) or "continuous" (moves hold instantaneous velocities, dt is
    the integrator step).  entries[k].remap maps live indices of entry k-1
    to live indices of entry k, which is what lets checkers follow robots
    through merges.
    """

    strategy: str
    kind: str
    dt: float
    gather_tol: float
    initial_diameter: float
    gathered: bool
    entries: list[TraceEntry] = field(default_factory=list)

    def validate(self) -> None:
        if self.kind not in ("fsync", "continuous"):
            raise ValueError(f"unknown trace kind {self.kind!r}")
        if not self.entries:
            raise ValueError("trace has no entries")
        total = self.entries[0].config.total_robots
        for prev, cur in zip(self.entries, self.entries[1:]):
            if not cur.time > prev.time:
                raise ValueError("trace times must be strictly increasing")
            if cur.config.n_live > prev.config.n_live:
                raise ValueError("live point count may never increase")
            if cur.config.total_robots != total:
                raise ValueError("total robot count must be preserved")

    @property
    def final_config(self) -> swarm.Configuration:
        return self.entries[-1].config

    @property
    def elapsed(self) -> float:
        return self.entries[-1].time - self.entries[0].time


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one property check over a snapshot or a whole trace.

    Margins are normalized: each measured quantity has its stated allowance
    subtracted, so passed == (worst_margin <= tolerance) with tolerance 0.
    """

    name: str
    passed: bool
    tolerance: float
    worst_margin: float
    first_violation_time: float | None = None
    details: tuple[str, ...] = ()


def _report(name, margins_times, details=()) -> CheckReport:
    """Fold (margin, time) pairs into a report; empty input passes vacuously."""
    worst = None
    first = None
    for margin, t in margins_times:
        if margin > 0.0 and first is None:
            first = t
        if worst is None or margin > worst:
            worst = margin
    if worst is None:
        worst = 0.0
    return CheckReport(
        name=name,
        passed=worst <= 0.0,
        tolerance=0.0,
        worst_margin=worst,
        first_violation_time=first,
        details=tuple(details),
    )


# ---------------------------------------------------------------------------
# progress measures
# ---------------------------------------------------------------------------


def global_ses_radius(config: swarm.Configuration) -> float:
    """Radius of the smallest enclosing ball of the live points."""
    _, radius = geometry.enclosing_ball(config.positions)
    return radius


def projected_length(config: swarm.Configuration, direction) -> float:
    """Perimeter of the convex hull of the swarm projected along a direction.

    Collinear projections measure twice their segment length and a single
    projected point measures 0 (see geometry.planar_hull_length).
    """
    basis = geometry.plane_basis(direction)
    coords = geometry.project_points(config.positions, basis)
    return geometry.planar_hull_length(coords)


def length_integral(config: swarm.Configuration, directions, weights=None) -> float:
    """Integral of the projected hull length over the direction hemisphere.

    directions are unit vectors covering the upper hemisphere; weights
    default to the equal 2*pi/count quadrature of hemisphere_directions and
    must sum to the hemisphere area 2*pi.
    """
    dirs = geometry.as_points(directions)
    if weights is None:
        w = np.full(len(dirs), geometry.hemisphere_weight(len(dirs)))
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (len(dirs),):
            raise ValueError("weights must align with directions")
    if abs(float(w.sum()) - 2.0 * math.pi) > 1e-6:
        raise ValueError("quadrature weights must sum to the hemisphere area 2*pi")
    return float(sum(wi * projected_length(config, d) for wi, d in zip(w, dirs)))


def min_projected_speed(n: int, alpha: float) -> float:
    """Projected-speed threshold that keeps the blocked direction fraction <= alpha.

    For n robots, directions are "blocked" when some unit velocity projects
    shorter than the threshold; this closed form sqrt(2*n*alpha - alpha^2)/n
    bounds the blocked fraction of the hemisphere by alpha.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 <= alpha <= 1.0):
        raise ValueError("alpha must be in [0, 1]")
    return math.sqrt(2.0 * n * alpha - alpha * alpha) / n


def blocked_fraction(velocities, eps: float, directions) -> float:
    """Fraction of directions nearly parallel to some nonzero velocity.

    A direction x is blocked when at least one nonzero velocity v satisfies
    min(angle(x, v), angle(-x, v)) < arcsin(eps).  Zero velocities block
    nothing; eps must lie in [0, 1].
    """
    if not (0.0 <= eps <= 1.0):
        raise ValueError("eps must be in [0, 1]")
    dirs = geometry.as_points(directions)
    vels = geometry.as_points(velocities)
    norms = np.linalg.norm(vels, axis=1)
    moving = vels[norms > 0.0]
    if len(moving) == 0:
        return 0.0
    moving = moving / np.linalg.norm(moving, axis=1)[:, None]
    threshold = math.asin(eps)
    # angle to the closest of {v, -v} is arccos(|cos|)
    cosines = np.abs(dirs @ moving.T)
    nearest = np.arccos(np.clip(cosines, -1.0, 1.0)).min(axis=1)
    return float(np.mean(nearest < threshold))


def scaling_fit(sizes, values) -> tuple[float, float]:
    """Least-squares slope and r^2 of log(values) against log(sizes)."""
    x = np.asarray(sizes, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 3:
        raise ValueError("need at least 3 aligned (size, value) pairs")
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise ValueError("sizes and values must be positive")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    residuals = ly - (slope * lx + intercept)
    ss_res = float(residuals @ residuals)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res <= 1e-24 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return float(slope), r2


# ---------------------------------------------------------------------------
# snapshot checkers
# ---------------------------------------------------------------------------


def _velocities_for(config: swarm.Configuration, velocities) -> np.ndarray:
    v = geometry.as_points(velocities)
    if len(v) != config.n_live:
        raise ValueError("velocities must align with the live points")
    return v


def contracting_check(
    config: swarm.Configuration, velocities, tol: float = 1e-6
) -> CheckReport:
    """Hull corners must move at unit speed without leaving the global hull.

    For every live point that is a vertex of the global convex hull the
    speed must sit in [1-tol, 1+tol] and the forward probe p + delta*v with
    delta = 1e-6 * diameter must stay inside the closed hull (1e-9 slack).
    A swarm collapsed to a single point passes vacuously.
    """
    v = _velocities_for(config, velocities)
    diam = swarm.diameter(config)
    if config.n_live == 1 or diam == 0.0:
        return _report("contracting", [], details=("single live point: vacuous",))
    hull = geometry.convex_hull(config.positions)
    if hull.dimensionality == 0:
        return _report("contracting", [], details=("degenerate hull: vacuous",))
    delta = PROBE_SCALE * diam
    margins = []
    for vi in hull.input_indices:
        speed = float(np.linalg.norm(v[vi]))
        margins.append((abs(speed - 1.0) - tol, config.time))
        probe = config.positions[vi] + delta * v[vi]
        margins.append((geometry.hull_excess(hull, probe) - INSIDE_SLACK, config.time))
    return _report("contracting", margins)


def tangential_normal_check(
    config: swarm.Configuration, velocities, graph: swarm.VisibilityGraph | None = None
) -> CheckReport:
    """Moving local-hull corners must keep strictly acute angles to their hull edges.

    For every live point that is a vertex of the hull of its own visible
    neighborhood and moves, the angle between its velocity and the edge
    toward each hull-adjacent neighbor must stay below pi/2 - 1e-9.
    Interior and stationary points are ignored.
    """
    v = _velocities_for(config, velocities)
    if graph is None:
        graph = swarm.visibility_graph(config)
    margins = []
    limit = 0.5 * math.pi - RIGHT_ANGLE_MARGIN
    for i in range(config.n_live):
        if float(np.linalg.norm(v[i])) <= 0.0:
            continue
        corner = _local_hull_corner(config, graph, i)
        if corner is None:
            continue
        for edge in corner:
            angle = geometry.angle_between(v[i], edge)
            margins.append((angle - limit, config.time))
    return _report("tangential-normal", margins)


def _local_hull_corner(config, graph, i):
    """Edge vectors to hull-adjacent neighbors if point i is a corner of the
    hull of its own neighborhood, else None."""
    pts = config.positions[[i, *graph.neighbors[i]]]
    hull = geometry.convex_hull(pts)
    if hull.dimensionality == 0:
        return None
    p = config.positions[i]
    match = np.nonzero((hull.vertices == p).all(axis=1))[0]
    if match.size == 0:
        return None
    vi = int(match[0])
    return [hull.vertices[j] - p for j in hull.adjacency[vi]]


# ---------------------------------------------------------------------------
# trace checkers
# ---------------------------------------------------------------------------


def check_connectivity(trace: Trace) -> CheckReport:
    """Visible pairs must still be visible one step later.

    Robots are followed through merges with the recorded index remaps; the
    allowance is 1e-9 for synchronous rounds and 2*dt for continuous steps
    (two robots may close the gap from both ends before re-measuring).
    """
    allowance = 1e-9 if trace.kind == "fsync" else 2.0 * trace.dt
    margins = []
    for prev, cur in zip(trace.entries, trace.entries[1:]):
        if cur.remap is None:
            raise ValueError("trace entries lack merge remaps; cannot follow robots")
        graph = swarm.visibility_graph(prev.config)
        pos = cur.config.positions
        for i, j in graph.edges():
            a, b = int(cur.remap[i]), int(cur.remap[j])
            dist = float(np.linalg.norm(pos[a] - pos[b]))
            margins.append((dist - (swarm.VISIBILITY_RANGE + allowance), prev.time))
    return _report("connectivity", margins)


def check_contracting(trace: Trace, tol: float = 1e-6) -> CheckReport:
    """contracting_check folded over every recorded instant with velocities."""
    _require_continuous(trace, "contracting")
    margins = []
    details: list[str] = []
    saw_moves = False
    for entry in trace.entries:
        if entry.moves is None:
            continue
        saw_moves = True
        rep = contracting_check(entry.config, entry.moves, tol=tol)
        margins.append((rep.worst_margin, entry.time))
        if not rep.passed and not details:
            details.extend(rep.details)
    if not saw_moves and len(trace.entries) > 1:
        raise ValueError("trace records no velocities; contracting check needs them")
    return _report("contracting", margins, details)


def check_tangential_normal(trace: Trace) -> CheckReport:
    """tangential_normal_check folded over every recorded instant."""
    _require_continuous(trace, "tangential-normal")
    margins = []
    saw_moves = False
    for entry in trace.entries:
        if entry.moves is None:
            continue
        saw_moves = True
        rep = tangential_normal_check(entry.config, entry.moves)
        margins.append((rep.worst_margin, entry.time))
    if not saw_moves and len(trace.entries) > 1:
        raise ValueError(
            "trace records no velocities; tangential-normal check needs them"
        )
    return _report("tangential-normal", margins)


def check_length_monotonic(trace: Trace, directions) -> CheckReport:
    """Projected hull length may grow by at most 10*dt between steps."""
    _require_continuous(trace, "ell-monotonic")
    dirs = geometry.as_points(directions)
    slack = 10.0 * trace.dt
    margins = []
    for prev, cur in zip(trace.entries, trace.entries[1:]):
        for d in dirs:
            grow = projected_length(cur.config, d) - projected_length(prev.config, d)
            margins.append((grow - slack, prev.time))
    return _report("ell-monotonic", margins)


def check_length_decay(trace: Trace, direction, n: int | None = None) -> CheckReport:
    """Projected length must shrink at rate at least 8*eps/n (discretized).

    eps is the smallest projected speed over all live points at the step
    start and n the total robot count.  Steps where two distinct live
    points project within 1e-6 of each other are skipped (the decay bound
    assumes distinct projections); the skip count lands in the details.
    """
    _require_continuous(trace, "ell-decay")
    d = geometry.as_point(direction)
    d = d / np.linalg.norm(d)
    if n is None:
        n = trace.entries[0].config.total_robots
    slack = 10.0 * trace.dt * n
    margins = []
    skipped = 0
    saw_moves = False
    for prev, cur in zip(trace.entries, trace.entries[1:]):
        if prev.moves is None:
            continue
        saw_moves = True
        if _projection_clash(prev.config, d):
            skipped += 1
            continue
        ell_prev = projected_length(prev.config, d)
        ell_cur = projected_length(cur.config, d)
        rate = (ell_cur - ell_prev) / (cur.time - prev.time)
        proj = prev.moves - np.outer(prev.moves @ d, d)
        eps = float(np.linalg.norm(proj, axis=1).min())
        bound = -8.0 * eps / n + slack
        margins.append((rate - bound, prev.time))
    if not saw_moves and len(trace.entries) > 1:
        raise ValueError("trace records no velocities; decay check needs them")
    details = (f"skipped {skipped} steps with clashing projections",)
    return _report("ell-decay", margins, details)


def _projection_clash(config: swarm.Configuration, direction: np.ndarray) -> bool:
    pos = config.positions
    if len(pos) < 2:
        return False
    flat = pos - np.outer(pos @ direction, direction)
    diff = flat[:, None, :] - flat[None, :, :]
    dist2 = (diff * diff).sum(axis=-1)
    dist2[np.diag_indices(len(pos))] = np.inf
    return bool(dist2.min() < PROJECTION_CLASH_TOL**2)


def _require_continuous(trace: Trace, what: str) -> None:
    if trace.kind != "continuous":
        raise ValueError(
            f"{what} check needs a continuous trace with velocities, got {trace.kind!r}"
        )
