"""Acceptance gate: ten pinned behavioral criteria, one test (and one
pass/fail line) per criterion.  Tolerances and budgets are frozen here on
purpose; loosening them is a contract change, not a test fix.

Shared fixtures keep the expensive run batches to one pass: the 100
synchronous runs feed criteria 2, 3 and 10, and the 50 continuous runs
feed criteria 4 and 6.
"""

import math
import time

import numpy as np
import pytest

from gather3d import analysis, generators, geometry, strategies, swarm

import oracles
from test_geometry import convex_combination_residual


def _verdict(tag: str, ok: bool, detail: str):
    line = f"{tag}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    assert ok, line


def _round_budget(n: int) -> int:
    # gathering must finish within 128*pi*n^2 + n synchronous rounds
    return int(math.ceil(128.0 * math.pi * n * n + n))


@pytest.fixture(scope="module")
def fsync_runs():
    """100 seeded random connected swarms (n <= 30) run to gathering."""
    rng = np.random.default_rng(20260822)
    runs = []
    for _ in range(100):
        n = int(rng.integers(3, 31))
        seed = int(rng.integers(1 << 62))
        cfg = generators.random_connected(n, seed)
        trace = strategies.run_fsync(
            cfg, strategies.GoToCenter(), max_rounds=_round_budget(n)
        )
        runs.append(
            {
                "config": cfg,
                "n": n,
                "seed": seed,
                "budget": _round_budget(n),
                "gathered": trace.gathered,
                "rounds": trace.elapsed,
                "final_live": trace.final_config.n_live,
                "connectivity": analysis.check_connectivity(trace),
            }
        )
    return runs


@pytest.fixture(scope="module")
def cont_runs():
    """50 seeded random swarms (n <= 20) integrated at dt = 1e-3."""
    rng = np.random.default_rng(20260823)
    dirs = geometry.hemisphere_directions(32)
    runs = []
    for _ in range(50):
        n = int(rng.integers(5, 21))
        seed = int(rng.integers(1 << 62))
        cfg = generators.random_connected(n, seed)
        trace = strategies.integrate(
            cfg,
            strategies.GoToCenterContinuous(),
            dt=1e-3,
            max_time=100.0,
            gather_tol=1e-3,
        )
        runs.append(
            {
                "n": n,
                "seed": seed,
                "gathered": trace.gathered,
                "contracting": analysis.check_contracting(trace, tol=1e-6),
                "monotonic": analysis.check_length_monotonic(trace, dirs),
            }
        )
    return runs


def test_criterion_01_quadratic_round_scaling():
    t0 = time.monotonic()
    sizes = [8, 16, 32, 64]
    rounds = []
    for n in sizes:
        trace = strategies.run_fsync(
            generators.circle_config(n),
            strategies.GoToCenter(),
            max_rounds=_round_budget(n),
        )
        assert trace.gathered
        rounds.append(trace.elapsed)
    exponent, r2 = analysis.scaling_fit(sizes, rounds)
    wall = time.monotonic() - t0
    ok = 1.6 <= exponent <= 2.4 and r2 >= 0.98 and wall < 120.0
    _verdict(
        "criterion 1 (quadratic round scaling on circles)",
        ok,
        f"exponent={exponent:.5f} r2={r2:.6f} rounds={rounds} wall={wall:.1f}s",
    )


def test_criterion_02_connectivity_preserved(fsync_runs):
    worst = max(r["connectivity"].worst_margin for r in fsync_runs)
    failures = sum(not r["connectivity"].passed for r in fsync_runs)
    ok = failures == 0
    _verdict(
        "criterion 2 (edges never stretch past 1 + 1e-9)",
        ok,
        f"runs=100 violations={failures} worst_margin={worst:.3e}",
    )


def test_criterion_03_gathering_within_round_budget(fsync_runs):
    bad = [
        r
        for r in fsync_runs
        if not (r["gathered"] and r["final_live"] == 1 and r["rounds"] <= r["budget"])
    ]
    slowest = max(fsync_runs, key=lambda r: r["rounds"] / r["budget"])
    ok = not bad
    _verdict(
        "criterion 3 (every run gathers within 128*pi*n^2 + n rounds)",
        ok,
        f"runs=100 incomplete={len(bad)} slowest={slowest['rounds']:.0f}"
        f"/{slowest['budget']} rounds at n={slowest['n']}",
    )


def test_criterion_04_contracting_certification(cont_runs):
    worst = max(r["contracting"].worst_margin for r in cont_runs)
    failures = sum(not r["contracting"].passed for r in cont_runs)
    ok = failures == 0
    _verdict(
        "criterion 4 (unit-speed hull corners stay inside the hull, tol 1e-6)",
        ok,
        f"runs=50 dt=1e-3 violations={failures} worst_margin={worst:.3e}",
    )


def test_criterion_05_continuous_gathering_time_bound():
    t0 = time.monotonic()
    cases = []
    ok = True
    for n in (8, 16, 32):
        cfg = generators.circle_config(n)
        delta = swarm.diameter(cfg)
        bound = 0.25 * math.pi * delta * n**1.5 + 1.0
        for strategy, dt in (
            (strategies.GoToCenterContinuous(), 1e-3),
            (strategies.MoveOnAngleMinimizer(), 2e-4),
        ):
            trace = strategies.integrate(
                cfg, strategy, dt=dt, max_time=bound, gather_tol=1e-3
            )
            good = trace.gathered and trace.elapsed <= bound
            ok = ok and good
            cases.append(f"{strategy.label}/n={n}: t={trace.elapsed:.3f}<={bound:.1f}")
    wall = time.monotonic() - t0
    ok = ok and wall < 600.0
    _verdict(
        "criterion 5 (circle gathering time within 0.25*pi*delta*n^1.5 + 1)",
        ok,
        "; ".join(cases) + f"; wall={wall:.1f}s",
    )


def test_criterion_06_projected_length_monotone(cont_runs):
    worst = max(r["monotonic"].worst_margin for r in cont_runs)
    failures = sum(not r["monotonic"].passed for r in cont_runs)
    ok = failures == 0
    _verdict(
        "criterion 6 (projected hull length grows at most 10*dt per step)",
        ok,
        f"runs=50 directions=32 violations={failures} worst_margin={worst:.3e}",
    )


def test_criterion_07_tangential_normal_certification():
    rng = np.random.default_rng(20260824)
    worst = -math.inf
    failures = 0
    for _ in range(50):
        n = int(rng.integers(4, 13))
        seed = int(rng.integers(1 << 62))
        cfg = generators.random_connected(n, seed)
        trace = strategies.integrate(
            cfg,
            strategies.MoveOnAngleMinimizer(),
            dt=5e-3,
            max_time=1.0,
            gather_tol=1e-3,
        )
        report = analysis.check_tangential_normal(trace)
        worst = max(worst, report.worst_margin)
        failures += not report.passed
    ok = failures == 0
    _verdict(
        "criterion 7 (corner velocities acute to hull edges every step)",
        ok,
        f"runs=50 violations={failures} worst_margin={worst:.3e}",
    )


def test_criterion_08_geometry_oracles():
    rng = np.random.default_rng(20260825)
    worst_radius_gap = -math.inf
    worst_residual = 0.0
    for _ in range(500):
        n = int(rng.integers(1, 21))
        pts = rng.uniform(-5.0, 5.0, size=(n, 3))
        sphere, support = geometry.smallest_enclosing_sphere(pts)
        oracle_radius = oracles.ses_sampling_radius(pts, rng, samples=10000)
        worst_radius_gap = max(worst_radius_gap, sphere.radius - oracle_radius)
        residual = convex_combination_residual(np.array(support), sphere.center)
        worst_residual = max(worst_residual, residual)
    worst_angle_gap = -math.inf
    for _ in range(200):
        m = int(rng.integers(1, 9))
        vectors = rng.normal(size=(m, 3))
        vectors[:, 2] = np.abs(vectors[:, 2]) + 0.1
        u = geometry.as_point(strategies.angle_minimizer(vectors))
        units = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
        mine = float(np.arccos(np.clip(units @ u, -1.0, 1.0)).max())
        worst_angle_gap = max(
            worst_angle_gap, mine - oracles.minimax_angle(vectors, count=100000)
        )
    ok = (
        worst_radius_gap <= 1e-7
        and worst_angle_gap <= 1e-2
        and worst_residual <= 1e-7
    )
    _verdict(
        "criterion 8 (enclosing-ball minimality, angle-minimizer gap, support witness)",
        ok,
        f"ball_gap={worst_radius_gap:.3e}<=1e-7 over 500, "
        f"angle_gap={worst_angle_gap:.3e}<=1e-2 over 200, "
        f"residual={worst_residual:.3e}<=1e-7",
    )


def test_criterion_09_coplanar_reduction():
    rng = np.random.default_rng(20260826)
    worst = 0.0
    converged = 0
    for k in range(20):
        n = int(rng.integers(3, 13))
        pts2 = oracles.random_connected_2d(n, rng)
        if k < 10:
            normal = np.array([0.0, 0.0, 1.0])
            offset = np.zeros(3)
        else:
            normal = rng.normal(size=3)
            normal /= np.linalg.norm(normal)
            offset = rng.normal(size=3)
        basis = geometry.plane_basis(normal)
        cfg = generators.coplanar_embed(pts2, basis, offset)
        base = geometry.project(offset, basis)
        pos2 = pts2.copy()
        mult2 = np.ones(n, dtype=np.int64)
        for _ in range(3000):
            if cfg.n_live == 1 and len(pos2) == 1:
                converged += 1
                break
            cfg = strategies.step_fsync(cfg, strategies.GoToCenter())
            pos2, mult2, _ = oracles.gtc_round_2d(pos2, mult2)
            back = geometry.project_points(cfg.positions, basis) - base
            if back.shape != pos2.shape or not np.array_equal(
                cfg.multiplicities, mult2
            ):
                worst = math.inf
                break
            worst = max(worst, float(np.abs(back - pos2).max()))
        else:
            worst = math.inf
    ok = converged == 20 and worst <= 1e-9
    _verdict(
        "criterion 9 (matches an independent planar twin step for step)",
        ok,
        f"configs=20 converged={converged} worst_coordinate_gap={worst:.3e}<=1e-9",
    )


def test_criterion_10_analytic_formula_checks(fsync_runs):
    # closed form for the projected-speed threshold
    eps_gap = 0.0
    for n in (1, 2, 3, 4, 8, 16, 32, 64, 128):
        for k in range(11):
            alpha = k / 10.0
            expected = math.sqrt(2.0 * n * alpha - alpha * alpha) / n
            eps_gap = max(
                eps_gap, abs(analysis.min_projected_speed(n, alpha) - expected)
            )
    # hemisphere integral of the projected length against the diameter bound
    dirs256 = geometry.hemisphere_directions(256)
    configs = [r["config"] for r in fsync_runs]
    configs += [generators.circle_config(n) for n in (8, 16, 32, 64)]
    configs += [generators.line_config(10, 0.5), generators.grid_config(12, 1.0)]
    worst_ratio = 0.0
    for cfg in configs:
        bound = 2.0 * math.pi**2 * swarm.diameter(cfg)
        worst_ratio = max(worst_ratio, analysis.length_integral(cfg, dirs256) / bound)
    # blocked direction fraction stays near the designed half
    dirs1024 = geometry.hemisphere_directions(1024)
    rng = np.random.default_rng(20260827)
    worst_frac = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 31))
        vels = rng.normal(size=(n, 3))
        vels /= np.linalg.norm(vels, axis=1, keepdims=True)
        eps = analysis.min_projected_speed(n, 0.5)
        worst_frac = max(worst_frac, analysis.blocked_fraction(vels, eps, dirs1024))
    ok = eps_gap <= 1e-12 and worst_ratio <= 1.02 and worst_frac <= 0.55
    _verdict(
        "criterion 10 (threshold formula, integral bound, blocked fraction)",
        ok,
        f"formula_gap={eps_gap:.2e} integral_ratio={worst_ratio:.4f}<=1.02 "
        f"blocked={worst_frac:.3f}<=0.55 over {len(configs)} configs / 100 sets",
    )
