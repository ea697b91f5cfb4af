import math

import numpy as np
import pytest

from gather3d import analysis, generators, geometry, strategies, swarm

import oracles


def adjacent_chords(cfg):
    pos = cfg.positions
    n = len(pos)
    return [float(np.linalg.norm(pos[(k + 1) % n] - pos[k])) for k in range(n)]


# ---------------------------------------------------------------------------
# circle
# ---------------------------------------------------------------------------


def test_circle_hexagon():
    cfg = generators.circle_config(6)
    radii = np.linalg.norm(cfg.positions[:, :2], axis=1)
    assert np.abs(radii - 1.0).max() < 1e-12
    assert np.abs(np.array(adjacent_chords(cfg)) - 1.0).max() < 1e-12
    assert np.all(cfg.positions[:, 2] == 0.0)


def test_circle_square():
    cfg = generators.circle_config(4)
    assert np.abs(np.array(adjacent_chords(cfg)) - 1.0).max() < 1e-12
    radii = np.linalg.norm(cfg.positions[:, :2], axis=1)
    assert np.abs(radii - math.sqrt(2.0) / 2.0).max() < 1e-12
    # diagonals sqrt(2) > 1 stay invisible
    g = swarm.visibility_graph(cfg)
    assert all(len(nbrs) == 2 for nbrs in g.neighbors)


def test_circle_32_cycle_ubg():
    cfg = generators.circle_config(32)
    expected = 1.0 / math.sin(math.pi / 32.0)
    assert abs(swarm.diameter(cfg) - expected) < 1e-9
    g = swarm.visibility_graph(cfg)
    assert all(len(nbrs) == 2 for nbrs in g.neighbors)


def test_circle_cycle_threshold():
    # from n=7 on, only the two adjacent chords are visible
    for n in range(7, 20):
        g = swarm.visibility_graph(generators.circle_config(n))
        assert all(len(nbrs) == 2 for nbrs in g.neighbors), n


def test_circle_rejects_small_n():
    with pytest.raises(ValueError):
        generators.circle_config(2)


# ---------------------------------------------------------------------------
# line
# ---------------------------------------------------------------------------


def test_line_pair():
    cfg = generators.line_config(2, 1.0)
    assert abs(swarm.diameter(cfg) - 1.0) < 1e-12


def test_line_diameter():
    cfg = generators.line_config(5, 0.5)
    assert abs(swarm.diameter(cfg) - 2.0) < 1e-12
    assert swarm.is_connected(swarm.visibility_graph(cfg))


def test_line_degenerate_projection():
    cfg = generators.line_config(5, 0.5)
    assert analysis.projected_length(cfg, [1.0, 0.0, 0.0]) == 0.0


def test_line_rejects_bad_spacing():
    with pytest.raises(ValueError):
        generators.line_config(3, 1.5)
    with pytest.raises(ValueError):
        generators.line_config(3, 0.0)


# ---------------------------------------------------------------------------
# random connected
# ---------------------------------------------------------------------------


def test_random_single_at_origin():
    cfg = generators.random_connected(1, 7)
    assert np.array_equal(cfg.positions, np.zeros((1, 3)))


def test_random_always_connected():
    rng = np.random.default_rng(0)
    for _ in range(25):
        n = int(rng.integers(1, 31))
        seed = int(rng.integers(1 << 62))
        cfg = generators.random_connected(n, seed)
        assert cfg.n_live == n
        assert swarm.is_connected(swarm.visibility_graph(cfg))


def test_random_deterministic():
    a = generators.random_connected(17, 123456789)
    b = generators.random_connected(17, 123456789)
    assert np.array_equal(a.positions, b.positions)


def test_random_respects_ball_radius():
    cfg = generators.random_connected(40, 5, ball_radius=1.5)
    assert np.linalg.norm(cfg.positions, axis=1).max() <= 1.5 + 0.9


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------


def test_grid_connected_and_sized():
    for n in (1, 2, 5, 9, 12):
        cfg = generators.grid_config(n)
        assert cfg.n_live == n
        assert swarm.is_connected(swarm.visibility_graph(cfg))


def test_grid_spacing():
    cfg = generators.grid_config(4, spacing=0.5)
    assert abs(swarm.diameter(cfg) - 0.5 * math.sqrt(2.0)) < 1e-12


# ---------------------------------------------------------------------------
# coplanar embedding
# ---------------------------------------------------------------------------


def test_embed_identity_plane():
    basis = geometry.plane_basis([0.0, 0.0, 1.0])
    square = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    cfg = generators.coplanar_embed(square, basis, np.zeros(3))
    assert np.array_equal(cfg.positions[:, :2], square)
    assert np.all(cfg.positions[:, 2] == 0.0)


def test_embed_project_round_trip():
    rng = np.random.default_rng(21)
    basis = geometry.plane_basis(np.array([0.3, -0.5, 0.81]) / np.linalg.norm([0.3, -0.5, 0.81]))
    offset = np.array([1.0, -2.0, 0.5])
    pts2 = oracles.random_connected_2d(9, rng)
    cfg = generators.coplanar_embed(pts2, basis, offset)
    back = geometry.project_points(cfg.positions - offset, basis)
    assert np.abs(back - pts2).max() < 1e-12


def test_gtc3d_preserves_plane():
    """A swarm started in a tilted plane never leaves it."""
    rng = np.random.default_rng(33)
    normal = np.array([0.2, 0.3, 0.933])
    basis = geometry.plane_basis(normal / np.linalg.norm(normal))
    offset = np.array([0.5, 0.5, -1.0])
    pts2 = oracles.random_connected_2d(8, rng)
    cfg = generators.coplanar_embed(pts2, basis, offset)
    trace = strategies.run_fsync(cfg, strategies.GoToCenter(), max_rounds=500)
    assert trace.gathered
    worst = 0.0
    for entry in trace.entries:
        off = (entry.config.positions - offset) @ basis.normal
        worst = max(worst, float(np.abs(off).max()))
    assert worst <= 1e-9
