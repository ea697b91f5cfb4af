"""Seeded initial-configuration generators.

Every generator returns a connected configuration (post-checked) at time 0
with all multiplicities 1.  Randomness only ever comes from the explicit
seed, so the same arguments reproduce the same configuration bit for bit.
"""

from __future__ import annotations

import math

import numpy as np

from . import geometry, swarm

# New random points must attach this close to an existing point so the
# visibility graph stays connected with margin.
ATTACH_RANGE = 0.9
# Resampling gives up loudly after this many rejected candidates per point.
MAX_ATTACH_TRIES = 100_000


def _post_check_connected(config: swarm.Configuration, what: str) -> swarm.Configuration:
    if not swarm.is_connected(swarm.visibility_graph(config)):
        raise RuntimeError(f"{what} produced a disconnected configuration")
    return config


def circle_config(n: int) -> swarm.Configuration:
    """n robots on a circle in the z=0 plane with unit consecutive chords.

    The circumradius 1/(2 sin(pi/n)) makes neighbouring robots sit at
    distance exactly 1, so the visibility graph is the cycle once n is
    large enough for the skip chords to exceed 1.
    """
    if n < 3:
        raise ValueError("circle_config needs n >= 3")
    radius = 1.0 / (2.0 * math.sin(math.pi / n))
    angles = 2.0 * math.pi * np.arange(n) / n
    pts = np.stack(
        [radius * np.cos(angles), radius * np.sin(angles), np.zeros(n)], axis=1
    )
    return _post_check_connected(swarm.Configuration(pts), "circle_config")


def line_config(n: int, spacing: float) -> swarm.Configuration:
    """n robots on the x axis with the given spacing (0 < spacing <= 1)."""
    if n < 1:
        raise ValueError("line_config needs n >= 1")
    if not (0.0 < spacing <= 1.0):
        raise ValueError("spacing must be in (0, 1] to keep the chain connected")
    pts = np.zeros((n, 3))
    pts[:, 0] = spacing * np.arange(n)
    return _post_check_connected(swarm.Configuration(pts), "line_config")


def random_connected(n: int, seed: int, ball_radius: float = 2.0) -> swarm.Configuration:
    """n robots sampled uniformly in a ball, forced connected by attachment.

    The first robot sits at the origin; every further candidate is resampled
    until it lands within 0.9 of an already placed robot (and not on top of
    one), which guarantees a connected unit ball graph.
    """
    if n < 1:
        raise ValueError("random_connected needs n >= 1")
    if ball_radius <= 0.0:
        raise ValueError("ball_radius must be positive")
    rng = np.random.default_rng(seed)
    placed = [np.zeros(3)]
    while len(placed) < n:
        for _ in range(MAX_ATTACH_TRIES):
            direction = rng.normal(size=3)
            norm = np.linalg.norm(direction)
            if norm == 0.0:
                continue
            radius = ball_radius * rng.random() ** (1.0 / 3.0)
            candidate = direction / norm * radius
            dists = [float(np.linalg.norm(candidate - p)) for p in placed]
            if min(dists) <= ATTACH_RANGE and min(dists) > 10.0 * swarm.MERGE_TOL:
                placed.append(candidate)
                break
        else:
            raise RuntimeError(
                f"random_connected could not attach point {len(placed)} "
                f"within {MAX_ATTACH_TRIES} tries"
            )
    return _post_check_connected(
        swarm.Configuration(np.array(placed)), "random_connected"
    )


def grid_config(n: int, spacing: float = 1.0) -> swarm.Configuration:
    """First n points of a square lattice in the z=0 plane, row-major.

    Rows have ceil(sqrt(n)) points; spacing <= 1 keeps the lattice (and any
    ragged last row) connected.
    """
    if n < 1:
        raise ValueError("grid_config needs n >= 1")
    if not (0.0 < spacing <= 1.0):
        raise ValueError("spacing must be in (0, 1] to keep the grid connected")
    cols = math.ceil(math.sqrt(n))
    pts = np.zeros((n, 3))
    idx = np.arange(n)
    pts[:, 0] = spacing * (idx % cols)
    pts[:, 1] = spacing * (idx // cols)
    return _post_check_connected(swarm.Configuration(pts), "grid_config")


def coplanar_embed(points2d, basis: geometry.PlaneBasis, offset) -> swarm.Configuration:
    """Embed a 2D configuration into the plane given by basis and offset.

    Each 2D point (a, b) maps to offset + a*u + b*v, so distances are
    preserved exactly and planar strategies can be compared against their
    3D counterparts.
    """
    coords = np.asarray(points2d, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 2 or coords.shape[0] < 1:
        raise ValueError(f"expected an (m, 2) array, got shape {coords.shape}")
    if not np.all(np.isfinite(coords)):
        raise ValueError("points have non-finite components")
    origin = geometry.as_point(offset)
    pts = origin[None, :] + coords[:, 0:1] * basis.u[None, :] + coords[:, 1:2] * basis.v[None, :]
    return _post_check_connected(swarm.Configuration(pts), "coplanar_embed")
