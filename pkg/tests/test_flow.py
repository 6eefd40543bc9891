import numpy as np
import pytest

from mcflab.curvature import compute_curvature
from mcflab.errors import SingularityReached
from mcflab.flow import FlowConfig, FlowState, mcf_step, run_flow
from mcflab.mesh import DiscreteHypersurface, validate_surface
from mcflab.remesh import enforce_edge_band
from mcflab.scenarios import make_circle, make_dumbbell, make_grim_reaper, make_sphere


def mean_radius(surf):
    c = surf.vertices.mean(axis=0)
    return float(np.linalg.norm(surf.vertices - c, axis=1).mean())


def test_shrinking_circle_tracks_exact():
    sc = make_circle(1.0, 256)
    st = FlowState.initial(sc.surface)
    cfg = FlowConfig(c_cfl=0.1, max_time=0.375, a_stop=1e4)
    snaps, outcome = run_flow(st, cfg, snapshot_every=500)
    r = mean_radius(snaps[-1].surface)
    exact = np.sqrt(1 - 2 * snaps[-1].time)
    assert outcome["termination"] == "max_time"
    assert abs(r - exact) / exact < 1e-3
    assert abs(exact - 0.5) < 1e-12


def test_shrinking_sphere_tracks_exact():
    sc = make_sphere(1.0, 3)
    st = FlowState.initial(sc.surface)
    cfg = FlowConfig(c_cfl=0.003, max_time=0.2, a_stop=1e4, integrator="semi-implicit")
    snaps, _ = run_flow(st, cfg, snapshot_every=500)
    r = mean_radius(snaps[-1].surface)
    exact = np.sqrt(1 - 4 * snaps[-1].time)
    assert abs(r - exact) / exact < 1e-2


def test_grim_reaper_translates_at_unit_speed():
    sc = make_grim_reaper(n=400)
    st = FlowState.initial(sc.surface, clamp_mask=sc.clamp_mask)
    cfg = FlowConfig(c_cfl=0.02, max_time=0.1, a_stop=1e4)
    snaps, _ = run_flow(st, cfg, snapshot_every=10000)
    n_arc = 400

    def height(surf, x0):
        v = surf.vertices[:n_arc]
        i = int(np.searchsorted(v[:, 0], x0))
        a, b = v[i - 1], v[i]
        s = (x0 - a[0]) / (b[0] - a[0])
        return a[1] + s * (b[1] - a[1])

    dt = snaps[-1].time - snaps[0].time
    for x0 in np.linspace(-1.0, 1.0, 11):
        dy = height(snaps[-1].surface, x0) - height(snaps[0].surface, x0)
        assert abs(dy / dt - 1.0) < 1e-2


def test_circle_extinction_singularity():
    sc = make_circle(1.0, 96)
    st = FlowState.initial(sc.surface)
    cfg = FlowConfig(c_cfl=0.1, max_time=0.6, a_stop=1e4)
    snaps, outcome = run_flow(st, cfg, snapshot_every=2000)
    assert outcome["termination"] == "singularity"
    assert abs(outcome["time"] - 0.5) < 0.02
    assert mean_radius(snaps[-1].surface) < 0.1


def test_sphere_extinction_time():
    sc = make_sphere(1.0, 2)
    st = FlowState.initial(sc.surface)
    cfg = FlowConfig(c_cfl=0.05, max_time=1.0, a_stop=1e4, integrator="semi-implicit")
    snaps, outcome = run_flow(st, cfg, snapshot_every=2000)
    assert outcome["termination"] == "singularity"
    assert abs(outcome["time"] - 0.25) / 0.25 < 0.05


def test_dumbbell_singularity_before_circumscribed_sphere():
    # avoidance-principle bound: the circumscribing sphere's lifetime R^2/4
    sc = make_dumbbell(n_axial=36, n_phi=28)
    r_circ = float(np.linalg.norm(sc.surface.vertices, axis=1).max())
    st = FlowState.initial(sc.surface)
    cfg = FlowConfig(c_cfl=0.05, max_time=2.0, a_stop=2000)
    snaps, outcome = run_flow(st, cfg, snapshot_every=500)
    assert outcome["termination"] == "singularity"
    assert outcome["time"] < r_circ ** 2 / 4


def test_avoidance_two_disjoint_flows():
    # sphere enclosing a dumbbell, flowed together as one two-component mesh
    db = make_dumbbell(n_axial=30, n_phi=20).surface
    sp = make_sphere(2.6, 2).surface
    verts = np.vstack([db.vertices, sp.vertices])
    faces = np.vstack([db.faces, sp.faces + db.n_vertices])
    both = DiscreteHypersurface(2, verts, faces)
    validate_surface(both)
    n_db = db.n_vertices
    st = FlowState.initial(both)
    cfg = FlowConfig(c_cfl=0.05, max_time=0.02, a_stop=2000)
    snaps, _ = run_flow(st, cfg, snapshot_every=20)
    dists, times = [], []
    for snap in snaps:
        v = snap.surface.vertices
        a, b = v[:n_db], v[n_db:]
        d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
        dists.append(float(np.sqrt(d2.min())))
        times.append(snap.time)
    assert min(dists) > 0
    for k in range(1, len(dists)):
        assert dists[k] >= dists[k - 1] - 1e-3 * (times[k] - times[k - 1])


def test_convexity_preserved_on_sphere():
    sc = make_sphere(1.0, 2)
    st = FlowState.initial(sc.surface)
    cfg = FlowConfig(c_cfl=0.1, max_time=1.0, a_stop=100.0)
    snaps, outcome = run_flow(st, cfg, snapshot_every=50)
    for snap in snaps:
        assert snap.curvature.principal[:, 0].min() >= -1e-3 * snap.curvature.mean.max()


def test_strict_mean_convexity_preserved():
    sc = make_dumbbell(n_axial=36, n_phi=28)
    st = FlowState.initial(sc.surface)
    cfg = FlowConfig(c_cfl=0.05, max_time=2.0, a_stop=400)
    snaps, outcome = run_flow(st, cfg, snapshot_every=100)
    assert outcome["termination"] == "singularity"
    for snap in snaps:
        assert snap.curvature.mean.min() > 0


def test_mcf_step_raises_past_threshold():
    sc = make_circle(0.05, 32)
    st = FlowState.initial(sc.surface)
    with pytest.raises(SingularityReached):
        mcf_step(st, FlowConfig(c_cfl=0.1, a_stop=100.0))


def test_curve_remesh_band():
    sc = make_circle(1.0, 64)
    band = (0.05, 0.1)
    new, _ = enforce_edge_band(sc.surface, band)
    el = new.edge_lengths()
    validate_surface(new)
    assert el.min() >= band[0] * 0.5 and el.max() <= band[1] * 1.01
    # flow with the band active keeps edges inside it
    st = FlowState.initial(new)
    cfg = FlowConfig(c_cfl=0.1, max_time=0.3, a_stop=1e4, edge_band=band)
    snaps, _ = run_flow(st, cfg, snapshot_every=200)
    el = snaps[-1].surface.edge_lengths()
    assert el.max() <= band[1] * 1.01


def test_mesh_remesh_split_collapse():
    sc = make_sphere(1.0, 2)
    el = sc.surface.edge_lengths()
    band = (0.6 * el.min(), 0.8 * el.max())
    new, _ = enforce_edge_band(sc.surface, band)
    validate_surface(new)
    assert new.edge_lengths().max() <= band[1] * 1.01


def test_semi_implicit_matches_explicit_on_circle():
    sc = make_circle(1.0, 128)
    out = []
    for integ in ("explicit", "semi-implicit"):
        st = FlowState.initial(sc.surface)
        cfg = FlowConfig(c_cfl=0.01, max_time=0.1, a_stop=1e4, integrator=integ)
        snaps, _ = run_flow(st, cfg, snapshot_every=10000)
        out.append(mean_radius(snaps[-1].surface))
    assert abs(out[0] - out[1]) < 5e-3
