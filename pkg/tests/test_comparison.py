import numpy as np
import pytest

from mcflab.comparison import (barrier_check, build_outer_shell, compute_r0,
                               embedding_monitor, rebuild_region)
from mcflab.curvature import compute_curvature
from mcflab.errors import BarrierViolated, EmbeddingLost, OffsetDegenerate
from mcflab.flow import FlowConfig, FlowState, run_flow
from mcflab.noncollapse import outer_sphere_curvature
from mcflab.oracles import exterior_ball_oracle
from mcflab.scenarios import make_circle, make_dumbbell, make_ellipse, make_sphere


def test_circle_shell():
    sc = make_circle(1.0, 128)
    cd = compute_curvature(sc.surface)
    sh = build_outer_shell(sc.surface, cd, 0.2)
    assert abs(sh.r0 - 0.2) < 1e-9
    assert abs(barrier_check(sh) - 1 / 1.2) < 2e-3
    assert abs(compute_r0(sh) - 0.2) < 1e-9
    rad = np.linalg.norm(sh.boundary.vertices, axis=1)
    assert np.abs(rad - 1.2).max() < 1e-9


def test_sphere_shell(sphere3):
    sc, cd = sphere3
    sh = build_outer_shell(sc.surface, cd, 0.1)
    assert abs(sh.r0 - 0.1) < 1e-9
    assert abs(barrier_check(sh) - 2 / 1.1) < 5e-2


def test_dumbbell_shell_reach(dumbbell_small):
    sc, cd = dumbbell_small
    sh = build_outer_shell(sc.surface, cd, 0.3 * 0.15)
    assert sh.boundary_curvature.mean.min() >= 0
    with pytest.raises(OffsetDegenerate):
        build_outer_shell(sc.surface, cd, 3 * 0.15)


def test_outer_sphere_curvature_circle():
    # oracle: largest exterior tangent ball inside the annulus has diameter
    # delta, so Zlow = -2/delta = -10 for the radius-2 circle with delta 0.2
    sc = make_circle(2.0, 128)
    cd = compute_curvature(sc.surface)
    sh = build_outer_shell(sc.surface, cd, 0.2)
    rep = outer_sphere_curvature(sc.surface, cd, sh)
    assert np.abs(rep.zlow + 10.0).max() < 1e-6
    oracle = exterior_ball_oracle(sc.surface, cd, sh, 0)
    assert abs(rep.zlow[0] - oracle) < 0.25
    assert abs(rep.alpha_outer - 0.05) < 1e-3


def test_outer_sphere_curvature_sphere(sphere3):
    sc, cd = sphere3
    sh = build_outer_shell(sc.surface, cd, 0.1)
    rep = outer_sphere_curvature(sc.surface, cd, sh)
    assert np.abs(rep.zlow + 20.0).max() / 20.0 < 5e-2
    oracle = exterior_ball_oracle(sc.surface, cd, sh, 0)
    assert abs(rep.zlow[0] - oracle) / 20.0 < 5e-2


def test_outer_kappa_min_fallback():
    sc = make_ellipse(2.0, 1.0, 128)
    cd = compute_curvature(sc.surface)
    sh = build_outer_shell(sc.surface, cd, 0.05)
    rep = outer_sphere_curvature(sc.surface, cd, sh)
    assert np.all(rep.zlow <= cd.kappa_min + 1e-6)


def test_barrier_violated_by_inward_moving_wall():
    sc = make_circle(1.0, 64)
    cd = compute_curvature(sc.surface)
    sh = build_outer_shell(sc.surface, cd, 0.2)
    hn = sh.boundary_curvature.mean
    vel = -2.0 * hn[:, None] * sh.boundary_curvature.normals
    with pytest.raises(BarrierViolated):
        barrier_check(sh, wall_velocity=vel)


def test_embedding_monitor_circle_exact():
    sc = make_circle(1.0, 256)
    cd = compute_curvature(sc.surface)
    sh = build_outer_shell(sc.surface, cd, 0.2)
    st = FlowState.initial(sc.surface)
    cfg = FlowConfig(c_cfl=0.1, max_time=0.3, a_stop=1e4)
    snaps, _ = run_flow(st, cfg, snapshot_every=200)
    rows = embedding_monitor(sh, snaps)
    for (t, d) in rows:
        exact = 0.2 + (1 - np.sqrt(1 - 2 * t))
        assert abs(d - exact) < 5e-3
    for k in range(1, len(rows)):
        assert rows[k][1] >= rows[k - 1][1] - 1e-3


def test_embedding_monitor_sphere_exact():
    sc = make_sphere(1.0, 2)
    cd = compute_curvature(sc.surface)
    sh = build_outer_shell(sc.surface, cd, 0.1)
    st = FlowState.initial(sc.surface)
    cfg = FlowConfig(c_cfl=0.01, max_time=0.15, a_stop=1e4, integrator="semi-implicit")
    snaps, _ = run_flow(st, cfg, snapshot_every=100)
    rows = embedding_monitor(sh, snaps)
    for (t, d) in rows:
        exact = 0.1 + (1 - np.sqrt(1 - 4 * t))
        assert abs(d - exact) < 2e-2
    for k in range(1, len(rows)):
        assert rows[k][1] >= rows[k - 1][1] - 1e-3


def test_embedding_lost_detected():
    sc = make_circle(1.0, 64)
    cd = compute_curvature(sc.surface)
    sh = build_outer_shell(sc.surface, cd, 0.2)
    escaped = sc.surface.with_vertices(sc.surface.vertices * 1.5)

    class Snap:
        surface = escaped
        time = 0.0

    with pytest.raises(EmbeddingLost):
        embedding_monitor(sh, [Snap()])


def test_alpha_outer_scale_covariance():
    rows = []
    for lam in (1.0, 2.5):
        sc = make_circle(2.0 * lam, 128)
        cd = compute_curvature(sc.surface)
        sh = build_outer_shell(sc.surface, cd, 0.2 * lam)
        rep = outer_sphere_curvature(sc.surface, cd, sh)
        rows.append(rep.alpha_outer)
    assert abs(rows[0] - rows[1]) < 1e-9


def test_static_shell_margin_identity():
    sc = make_circle(1.0, 96)
    cd = compute_curvature(sc.surface)
    sh = build_outer_shell(sc.surface, cd, 0.15)
    assert barrier_check(sh) == float(sh.boundary_curvature.mean.min())
