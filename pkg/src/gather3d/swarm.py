"""Swarm state: point configurations with multiplicities and their visibility graph.

A configuration is an immutable snapshot of the live points.  Robots that
occupy the same point are collapsed into a single entry whose multiplicity
counts them, so the sum of multiplicities stays equal to the original robot
count across an entire run.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import geometry

# Two robots see each other iff their distance is at most VISIBILITY_RANGE;
# the slack keeps edges at exactly the range stable under rounding.
VISIBILITY_RANGE = 1.0
VISIBILITY_SLACK = 1e-12
# Live points closer than this are considered the same point and merged.
MERGE_TOL = 1e-9


@dataclass(frozen=True)
class Configuration:
    """Immutable swarm snapshot: live points, multiplicities, model time."""

    positions: np.ndarray
    multiplicities: np.ndarray | None = None
    time: float = 0.0

    def __post_init__(self):
        pos = geometry.as_points(self.positions).copy()
        if self.multiplicities is None:
            mult = np.ones(len(pos), dtype=np.int64)
        else:
            mult = np.asarray(self.multiplicities, dtype=np.int64).copy()
        if mult.shape != (len(pos),):
            raise ValueError("multiplicities must align with positions")
        if np.any(mult < 1):
            raise ValueError("multiplicities must be >= 1")
        if not np.isfinite(self.time):
            raise ValueError("time must be finite")
        pos.setflags(write=False)
        mult.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "multiplicities", mult)

    @property
    def n_live(self) -> int:
        return len(self.positions)

    @property
    def total_robots(self) -> int:
        return int(self.multiplicities.sum())


@dataclass(frozen=True)
class VisibilityGraph:
    """Unit ball graph over the live points of a configuration."""

    neighbors: tuple[tuple[int, ...], ...]

    @property
    def n(self) -> int:
        return len(self.neighbors)

    def edges(self):
        for i, nbrs in enumerate(self.neighbors):
            for j in nbrs:
                if j > i:
                    yield (i, j)


def visibility_graph(config: Configuration) -> VisibilityGraph:
    """Edges join live points at distance <= 1 (inclusive, tiny slack)."""
    pos = config.positions
    diff = pos[:, None, :] - pos[None, :, :]
    dist2 = (diff * diff).sum(axis=-1)
    limit = (VISIBILITY_RANGE + VISIBILITY_SLACK) ** 2
    adj = dist2 <= limit
    np.fill_diagonal(adj, False)
    return VisibilityGraph(
        neighbors=tuple(tuple(int(j) for j in np.nonzero(row)[0]) for row in adj)
    )


def is_connected(graph: VisibilityGraph) -> bool:
    """Breadth-first reachability over the live points."""
    n = graph.n
    if n <= 1:
        return True
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        i = queue.popleft()
        for j in graph.neighbors[i]:
            if not seen[j]:
                seen[j] = True
                count += 1
                queue.append(j)
    return count == n


def _merge_with_map(config: Configuration) -> tuple[Configuration, int, np.ndarray]:
    """Merge coincident points; also return the old->new index map."""
    pos = config.positions
    m = len(pos)
    parent = list(range(m))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    diff = pos[:, None, :] - pos[None, :, :]
    close = (diff * diff).sum(axis=-1) <= MERGE_TOL * MERGE_TOL
    ii, jj = np.nonzero(np.triu(close, k=1))
    for i, j in zip(ii.tolist(), jj.tolist()):
        ri, rj = find(i), find(j)
        if ri != rj:
            # smaller index wins so the surviving entry is deterministic
            parent[max(ri, rj)] = min(ri, rj)

    roots = sorted({find(i) for i in range(m)})
    new_index = {root: k for k, root in enumerate(roots)}
    remap = np.array([new_index[find(i)] for i in range(m)], dtype=np.int64)
    if len(roots) == m:
        return config, 0, remap
    mult = np.zeros(len(roots), dtype=np.int64)
    np.add.at(mult, remap, config.multiplicities)
    merged = Configuration(pos[roots], mult, config.time)
    return merged, m - len(roots), remap


def merge_coincident(config: Configuration) -> tuple[Configuration, int]:
    """Collapse points within 1e-9 of each other into multiplicity entries.

    The surviving entry keeps the position of the lowest-index member, so
    merging is deterministic and idempotent.  The merge count is the number
    of entries removed.
    """
    merged, merges, _ = _merge_with_map(config)
    return merged, merges


def diameter(config: Configuration) -> float:
    """Largest pairwise distance between live points (0 for a single point)."""
    pos = config.positions
    if len(pos) == 1:
        return 0.0
    diff = pos[:, None, :] - pos[None, :, :]
    return float(np.sqrt((diff * diff).sum(axis=-1).max()))


def gathered(config: Configuration, tol: float) -> bool:
    """True when the swarm diameter is at most tol (tol 0 means one live point)."""
    if tol < 0.0:
        raise ValueError("gathering tolerance must be >= 0")
    return diameter(config) <= tol
