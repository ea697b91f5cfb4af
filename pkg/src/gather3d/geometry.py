"""Robust low-level geometric primitives for swarms in 3D Euclidean space.

Everything here is deterministic: for a fixed input ordering the same bits go
in and the same bits come out.  Tolerances are relative to the scale of the
input wherever a scale exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls
from scipy.spatial import ConvexHull as _QhullConvexHull
from scipy.spatial import QhullError

# Relative tolerance for in-sphere tests inside the Welzl recursion.
IN_SPHERE_RTOL = 1e-9
# Singular values below RANK_RTOL * diameter count as zero when detecting
# the dimensionality of a point set.
RANK_RTOL = 1e-9

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def as_point(p) -> np.ndarray:
    """Coerce to a finite float64 vector of shape (3,)."""
    a = np.asarray(p, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("point has non-finite components")
    return a


def as_points(points) -> np.ndarray:
    """Coerce to a finite float64 array of shape (m, 3), m >= 1."""
    a = np.asarray(points, dtype=float)
    if a.ndim != 2 or a.shape[1] != 3 or a.shape[0] < 1:
        raise ValueError(f"expected an (m, 3) point array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("points have non-finite components")
    return a


@dataclass(frozen=True)
class Sphere:
    """A ball given by center and radius (radius >= 0)."""

    center: np.ndarray
    radius: float


@dataclass(frozen=True)
class PlaneBasis:
    """Orthonormal right-handed frame (u, v, normal) for a plane through the origin."""

    normal: np.ndarray
    u: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class ConvexHullResult:
    """Convex hull of a 3D point set with explicit degeneracy handling.

    dimensionality is the affine rank of the input (0, 1, 2 or 3).  vertices
    holds the extreme points only; edges/faces/adjacency index into it.  For
    dimensionality 2 the adjacency is the polygon cycle, for 3 it follows the
    true polytope edges (coplanar facet triangulations are merged).  faces is
    populated (as triangles) only for dimensionality 3.  input_indices maps
    each hull vertex back to a row of the input array.
    """

    dimensionality: int
    vertices: np.ndarray
    edges: tuple[tuple[int, int], ...]
    faces: tuple[tuple[int, int, int], ...]
    adjacency: tuple[tuple[int, ...], ...]
    input_indices: tuple[int, ...]
    # Outward face planes (a, b, c, d) with a*x+b*y+c*z+d <= 0 inside,
    # kept for dimensionality 3 to make containment tests cheap.
    face_planes: np.ndarray | None = field(default=None, repr=False)
    # Orthonormal basis of the affine subspace for dimensionality < 3.
    subspace: PlaneBasis | None = field(default=None, repr=False)


# ---------------------------------------------------------------------------
# smallest enclosing sphere (Welzl, move-to-front)
# ---------------------------------------------------------------------------


def _contains(center, radius, p) -> bool:
    # relative slack so boundary points survive the floating-point round trip
    return math.dist(center, p) <= radius + IN_SPHERE_RTOL * (1.0 + radius)


def _ball_2(a, b):
    c = (0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2]))
    return c, math.dist(c, a)


def _ball_3(a, b, c):
    # circumcircle of the triangle, center in its plane
    ux, uy, uz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    vx, vy, vz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    uu = ux * ux + uy * uy + uz * uz
    vv = vx * vx + vy * vy + vz * vz
    uv = ux * vx + uy * vy + uz * vz
    det = uu * vv - uv * uv
    if det <= 1e-14 * uu * vv or det <= 0.0:
        return None  # collinear support, no finite circumcircle
    s = 0.5 * vv * (uu - uv) / det
    t = 0.5 * uu * (vv - uv) / det
    ctr = (a[0] + s * ux + t * vx, a[1] + s * uy + t * vy, a[2] + s * uz + t * vz)
    return ctr, math.dist(ctr, a)


def _ball_4(a, b, c, d):
    # circumsphere of the tetrahedron via a 3x3 solve (Cramer)
    r1 = (b[0] - a[0], b[1] - a[1], b[2] - a[2])
    r2 = (c[0] - a[0], c[1] - a[1], c[2] - a[2])
    r3 = (d[0] - a[0], d[1] - a[1], d[2] - a[2])
    h1 = 0.5 * (r1[0] * r1[0] + r1[1] * r1[1] + r1[2] * r1[2])
    h2 = 0.5 * (r2[0] * r2[0] + r2[1] * r2[1] + r2[2] * r2[2])
    h3 = 0.5 * (r3[0] * r3[0] + r3[1] * r3[1] + r3[2] * r3[2])
    det = (
        r1[0] * (r2[1] * r3[2] - r2[2] * r3[1])
        - r1[1] * (r2[0] * r3[2] - r2[2] * r3[0])
        + r1[2] * (r2[0] * r3[1] - r2[1] * r3[0])
    )
    scale = max(abs(v) for r in (r1, r2, r3) for v in r)
    if scale == 0.0 or abs(det) <= 1e-12 * scale**3:
        return None  # coplanar support, no finite circumsphere
    x = (
        h1 * (r2[1] * r3[2] - r2[2] * r3[1])
        - r1[1] * (h2 * r3[2] - r2[2] * h3)
        + r1[2] * (h2 * r3[1] - r2[1] * h3)
    ) / det
    y = (
        r1[0] * (h2 * r3[2] - r2[2] * h3)
        - h1 * (r2[0] * r3[2] - r2[2] * r3[0])
        + r1[2] * (r2[0] * h3 - h2 * r3[0])
    ) / det
    z = (
        r1[0] * (r2[1] * h3 - h2 * r3[1])
        - r1[1] * (r2[0] * h3 - h2 * r3[0])
        + h1 * (r2[0] * r3[1] - r2[1] * r3[0])
    ) / det
    ctr = (a[0] + x, a[1] + y, a[2] + z)
    return ctr, math.dist(ctr, a)


def _ball_of_boundary(boundary):
    """Smallest ball with the (1..4) boundary points on its surface.

    Degenerate boundary sets (collinear triples, coplanar quadruples) arise
    only through floating-point edge cases; fall back to the smallest
    sub-boundary ball that still contains every point.
    """
    k = len(boundary)
    if k == 0:
        return (0.0, 0.0, 0.0), -1.0
    if k == 1:
        return boundary[0], 0.0
    if k == 2:
        return _ball_2(*boundary)
    ball = _ball_3(*boundary) if k == 3 else _ball_4(*boundary)
    if ball is not None:
        return ball
    best = None
    for drop in range(k):
        sub = boundary[:drop] + boundary[drop + 1 :]
        c, r = _ball_of_boundary(sub)
        if all(_contains(c, r, q) for q in boundary):
            if best is None or r < best[1]:
                best = (c, r)
    if best is None:  # last resort: pairwise diameter ball
        best = (0.0, 0.0, 0.0), -1.0
        for i in range(k):
            for j in range(i + 1, k):
                c, r = _ball_2(boundary[i], boundary[j])
                if r > best[1]:
                    best = (c, r)
    return best


def enclosing_ball(points) -> tuple[np.ndarray, float]:
    """Center and radius of the smallest enclosing ball of a 3D point set.

    Welzl's move-to-front algorithm with an explicit basis solver for 1 to 4
    support points.  No shuffling: the result is deterministic for a fixed
    input ordering.  Recursion depth is bounded by the support size, not by
    the number of points.
    """
    pts = as_points(points)
    work = [tuple(p) for p in pts]

    def solve(end: int, boundary: tuple) -> tuple:
        ball = _ball_of_boundary(boundary)
        if len(boundary) == 4:
            return ball
        k = 0
        while k < end:
            p = work[k]
            if not _contains(ball[0], ball[1], p):
                ball = solve(k, boundary + (p,))
                work.insert(0, work.pop(k))
            k += 1
        return ball

    center, radius = solve(len(work), ())
    return np.array(center), max(radius, 0.0)


def smallest_enclosing_sphere(points) -> tuple[Sphere, list[np.ndarray]]:
    """Smallest enclosing sphere plus a support-point witness.

    Returns
    -------
    sphere : Sphere
        Unique smallest ball containing every input point.
    support : list of ndarray
        1 to 4 input points on the surface whose convex combination
        reconstructs the center.  Under cospherical degeneracy the witness
        is one valid choice among several; only center and radius are
        contractual.
    """
    pts = as_points(points)
    center, radius = enclosing_ball(pts)
    support = _support_witness(pts, center, radius)
    return Sphere(center=center, radius=radius), support


def _support_witness(pts: np.ndarray, center: np.ndarray, radius: float):
    dist = np.linalg.norm(pts - center, axis=1)
    tol = IN_SPHERE_RTOL * (1.0 + radius)
    on = np.nonzero(np.abs(dist - radius) <= tol)[0]
    if on.size == 0:
        on = np.array([int(np.argmax(dist))])
    # convex weights over the boundary points: solve [P^T; s*1] w = [c; s]
    # with nonnegative w.  The active-set solution uses at most 4 points.
    scale = 1.0 + float(np.linalg.norm(center))
    a = np.vstack([pts[on].T, np.full(on.size, scale)])
    b = np.concatenate([center, [scale]])
    w, _ = nnls(a, b)
    total = w.sum()
    if total > 0.0:
        w = w / total
    keep = on[w > 1e-12]
    if keep.size == 0:
        keep = on[:1]
    return [pts[i].copy() for i in keep]


# ---------------------------------------------------------------------------
# convex hulls with explicit degeneracy handling
# ---------------------------------------------------------------------------


def _pointset_diameter(pts: np.ndarray) -> float:
    if len(pts) == 1:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff * diff).sum(axis=-1).max()))


def _detect_dimensionality(pts: np.ndarray):
    """Affine rank of the point set and an orthonormal basis of its span."""
    diam = _pointset_diameter(pts)
    centered = pts - pts.mean(axis=0)
    if diam == 0.0:
        return 0, diam, np.eye(3)
    _, sv, vt = np.linalg.svd(centered, full_matrices=True)
    sv = np.concatenate([sv, np.zeros(3 - len(sv))])
    rank = int(np.sum(sv > RANK_RTOL * diam))
    return min(rank, 3), diam, vt


def _monotone_chain(coords: np.ndarray, tol_area: float) -> list[int]:
    """Indices of the extreme points of a 2D set, in counterclockwise order.

    Strictly convex turns only: points interior to hull edges are dropped.
    """
    order = np.lexsort((coords[:, 1], coords[:, 0]))

    def cross(o, a, b):
        return (coords[a][0] - coords[o][0]) * (coords[b][1] - coords[o][1]) - (
            coords[a][1] - coords[o][1]
        ) * (coords[b][0] - coords[o][0])

    def half(indices):
        chain: list[int] = []
        for idx in indices:
            while len(chain) >= 2 and cross(chain[-2], chain[-1], idx) <= tol_area:
                chain.pop()
            if chain and np.all(coords[chain[-1]] == coords[idx]):
                continue
            chain.append(int(idx))
        return chain

    lower = half(order)
    upper = half(order[::-1])
    hull = lower[:-1] + upper[:-1]
    if not hull:
        hull = [int(order[0])]
    # collapse duplicates that survive when the set is a single point or pair
    seen: list[int] = []
    for idx in hull:
        if not any(np.all(coords[idx] == coords[j]) for j in seen):
            seen.append(idx)
    return seen


def convex_hull(points) -> ConvexHullResult:
    """Convex hull of a 3D point set, degeneracy-aware.

    Dimensionality is detected from the singular values of the centered
    point matrix (values below 1e-9 times the diameter count as zero) and
    the hull is computed inside the detected affine subspace.
    """
    pts = as_points(points)
    dim, diam, vt = _detect_dimensionality(pts)

    if dim == 0:
        return ConvexHullResult(
            dimensionality=0,
            vertices=pts[:1].copy(),
            edges=(),
            faces=(),
            adjacency=((),),
            input_indices=(0,),
        )

    if dim == 1:
        axis = vt[0]
        t = (pts - pts[0]) @ axis
        lo, hi = int(np.argmin(t)), int(np.argmax(t))
        verts = pts[[lo, hi]].copy()
        basis = PlaneBasis(normal=np.array(vt[2]), u=np.array(axis), v=np.array(vt[1]))
        return ConvexHullResult(
            dimensionality=1,
            vertices=verts,
            edges=((0, 1),),
            faces=(),
            adjacency=((1,), (0,)),
            input_indices=(lo, hi),
            subspace=basis,
        )

    if dim == 2:
        u, v, normal = vt[0], vt[1], vt[2]
        coords = (pts - pts.mean(axis=0)) @ np.stack([u, v]).T
        cycle = _monotone_chain(coords, tol_area=1e-12 * diam * diam)
        k = len(cycle)
        verts = pts[cycle].copy()
        edges = tuple((i, (i + 1) % k) for i in range(k))
        adjacency = tuple(tuple(sorted(((i - 1) % k, (i + 1) % k))) for i in range(k))
        basis = PlaneBasis(normal=np.array(normal), u=np.array(u), v=np.array(v))
        return ConvexHullResult(
            dimensionality=2,
            vertices=verts,
            edges=edges,
            faces=(),
            adjacency=adjacency,
            input_indices=tuple(int(i) for i in cycle),
            subspace=basis,
        )

    try:
        qh = _QhullConvexHull(pts)
    except QhullError as exc:  # rank said 3, qhull disagrees: input is pathological
        raise ValueError(f"convex hull failed on near-degenerate input: {exc}") from exc

    vertex_ids = [int(i) for i in qh.vertices]
    local = {inp: loc for loc, inp in enumerate(vertex_ids)}
    faces = tuple(tuple(local[int(i)] for i in simplex) for simplex in qh.simplices)

    # True polytope edges: simplex edges shared by two non-coplanar facets.
    # Coplanar facet pairs come from qhull triangulating a merged face.
    normals = qh.equations[:, :3]
    edge_set: set[tuple[int, int]] = set()
    for f, nbrs in enumerate(qh.neighbors):
        simplex = set(int(i) for i in qh.simplices[f])
        for g in nbrs:
            g = int(g)
            if g < f:
                continue
            if 1.0 - abs(float(normals[f] @ normals[g])) <= 1e-10:
                continue
            shared = simplex & set(int(i) for i in qh.simplices[g])
            if len(shared) == 2:
                a, b = sorted(local[i] for i in shared)
                edge_set.add((a, b))
    edges = tuple(sorted(edge_set))
    adjacency_sets: list[set[int]] = [set() for _ in vertex_ids]
    for a, b in edges:
        adjacency_sets[a].add(b)
        adjacency_sets[b].add(a)
    adjacency = tuple(tuple(sorted(s)) for s in adjacency_sets)

    return ConvexHullResult(
        dimensionality=3,
        vertices=pts[vertex_ids].copy(),
        edges=edges,
        faces=faces,
        adjacency=adjacency,
        input_indices=tuple(vertex_ids),
        face_planes=qh.equations.copy(),
    )


def hull_excess(hull: ConvexHullResult, point) -> float:
    """How far a point sticks out of the hull; values <= 0 mean inside.

    For dimensionality 3 this is the largest signed distance to a face
    plane; for lower dimensionalities it combines the distance to the
    affine subspace with the distance outside the hull within it.
    """
    p = as_point(point)
    if hull.dimensionality == 3:
        assert hull.face_planes is not None
        return float((hull.face_planes[:, :3] @ p + hull.face_planes[:, 3]).max())
    if hull.dimensionality == 0:
        return float(np.linalg.norm(p - hull.vertices[0]))
    origin = hull.vertices[0]
    if hull.dimensionality == 1:
        axis = hull.vertices[1] - origin
        length = float(np.linalg.norm(axis))
        axis = axis / length
        rel = p - origin
        t = float(rel @ axis)
        t_clamped = min(max(t, 0.0), length)
        return float(np.linalg.norm(rel - t_clamped * axis))
    basis = hull.subspace
    assert basis is not None
    rel = p - origin
    off_plane = abs(float(rel @ basis.normal))
    verts2 = (hull.vertices - origin) @ np.stack([basis.u, basis.v]).T
    q = np.array([float(rel @ basis.u), float(rel @ basis.v)])
    k = len(verts2)
    inside_excess = -math.inf
    for i in range(k):
        a, b = verts2[i], verts2[(i + 1) % k]
        edge = b - a
        # outward normal of the CCW polygon edge
        nrm = np.array([edge[1], -edge[0]])
        norm_len = float(np.linalg.norm(nrm))
        if norm_len == 0.0:
            continue
        inside_excess = max(inside_excess, float((q - a) @ nrm) / norm_len)
    return max(off_plane, inside_excess)


# ---------------------------------------------------------------------------
# projections and planar hull length
# ---------------------------------------------------------------------------


def plane_basis(normal) -> PlaneBasis:
    """Deterministic orthonormal in-plane frame for a given plane normal.

    The seed axis is the coordinate axis least aligned with the normal
    (lowest index on ties), so normal (0,0,1) yields u=(1,0,0), v=(0,1,0)
    and (u, v, normal) is always right-handed.
    """
    n = as_point(normal)
    length = float(np.linalg.norm(n))
    if length <= 1e-12:
        raise ValueError("plane normal must be nonzero")
    n = n / length
    seed_axis = int(np.argmin(np.abs(n)))
    e = np.zeros(3)
    e[seed_axis] = 1.0
    u = e - float(e @ n) * n
    u = u / np.linalg.norm(u)
    v = np.cross(n, u)
    return PlaneBasis(normal=n, u=u, v=v)


def project(point, basis: PlaneBasis) -> np.ndarray:
    """Orthogonal projection onto the plane, expressed in its (u, v) frame."""
    p = as_point(point)
    return np.array([float(p @ basis.u), float(p @ basis.v)])


def project_points(points, basis: PlaneBasis) -> np.ndarray:
    """Vectorized `project` for an (m, 3) array; returns (m, 2)."""
    pts = as_points(points)
    return pts @ np.stack([basis.u, basis.v]).T


def planar_hull_length(points2d) -> float:
    """Perimeter of the convex hull of a 2D point set.

    Degenerate conventions: coincident points measure 0 and a collinear set
    measures twice its segment length (the closed boundary walks the segment
    out and back), so the value is continuous under perturbations.
    """
    coords = np.asarray(points2d, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 2 or coords.shape[0] < 1:
        raise ValueError(f"expected an (m, 2) array, got shape {coords.shape}")
    if not np.all(np.isfinite(coords)):
        raise ValueError("points have non-finite components")
    span = coords.max(axis=0) - coords.min(axis=0)
    scale = float(max(span[0], span[1]))
    if scale == 0.0:
        return 0.0
    cycle = _monotone_chain(coords, tol_area=1e-12 * scale * scale)
    if len(cycle) == 1:
        return 0.0
    total = 0.0
    for i, idx in enumerate(cycle):
        nxt = cycle[(i + 1) % len(cycle)]
        total += float(np.linalg.norm(coords[nxt] - coords[idx]))
    return total


# ---------------------------------------------------------------------------
# rays, quadrature directions, angles
# ---------------------------------------------------------------------------


def ray_ball_exit(origin, direction, ball: Sphere) -> float:
    """Length of the ray segment from origin to where it leaves the ball.

    The origin must lie inside the closed ball (strictly outside by more
    than 1e-9 is an error).  Returns 0 when the origin sits on the boundary
    and the direction points outward or tangentially.
    """
    o = as_point(origin)
    d = as_point(direction)
    norm = float(np.linalg.norm(d))
    if norm <= 1e-12:
        raise ValueError("ray direction must be nonzero")
    d = d / norm
    rel = o - ball.center
    dist = float(np.linalg.norm(rel))
    if dist > ball.radius + 1e-9:
        raise ValueError("ray origin lies outside the ball")
    b = float(d @ rel)
    c = dist * dist - ball.radius * ball.radius
    disc = b * b - c
    t = -b + math.sqrt(max(disc, 0.0))
    return max(t, 0.0)


def hemisphere_directions(count: int) -> np.ndarray:
    """Deterministic unit directions covering the upper hemisphere (z > 0).

    Fibonacci spiral with equal-area spacing; every direction carries the
    same quadrature weight 2*pi/count.  count=1 returns the pole.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if count == 1:
        return np.array([[0.0, 0.0, 1.0]])
    k = np.arange(count) + 0.5
    z = 1.0 - k / count
    rho = np.sqrt(1.0 - z * z)
    phi = k * GOLDEN_ANGLE
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def hemisphere_weight(count: int) -> float:
    """Quadrature weight shared by every direction from hemisphere_directions."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return 2.0 * math.pi / count


def angle_between(u, v) -> float:
    """Angle in [0, pi] between two nonzero vectors, stable near 0 and pi."""
    a = as_point(u)
    b = as_point(v)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na <= 1e-12 or nb <= 1e-12:
        raise ValueError("angle of a zero vector is undefined")
    cross = np.cross(a, b)
    return math.atan2(float(np.linalg.norm(cross)), float(a @ b))
