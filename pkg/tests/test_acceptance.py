"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with its measured numbers.  Tolerances are pinned here.
"""
import json
import os
import time

import numpy as np
import pytest

from mcflab import io as mio
from mcflab.curvature import compute_curvature
from mcflab.domain import build_domain
from mcflab.noncollapse import (all_pairs_sup_Z, estimate_monitors,
                                inner_sphere_curvature)
from mcflab.oracles import DoublePointWalker, sphere_lemma_oracle
from mcflab.runner import run
from mcflab.scenarios import (make_circle, make_dumbbell, make_ellipse,
                              make_grim_reaper, make_limacon)
from mcflab.surgery import SurgeryConfig, h1_scale_guard
from mcflab.tracing import Tracer
from mcflab.visibility import EPS_SELF_REL, visible_set
from mcflab.noncollapse import tangency_identity_check


def _report(name, ok, detail):
    print(f"\n{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# shared heavy runs (module scope)
# ---------------------------------------------------------------------------

DUMBBELL_CFG = {
    "schema": 1,
    "scenario": {"name": "dumbbell", "params": {}},
    "flow": {"c_cfl": 0.05, "max_time": 10.0, "a_stop": 2500.0},
    "shell": {"enabled": True, "delta": None},
    "surgery": {"enabled": True, "h1": 3.0, "h2": 6.0, "h3": 12.0,
                "eps_neck": 0.35, "l0": 10.0, "theta": 2.0,
                "guard_factor": 0.002},
    "diagnostics": {"cadence": 25, "noncollapse": True, "monitors": True},
}

LIMACON_CFG = {
    "schema": 1,
    "scenario": {"name": "limacon", "params": {"focus": 0.0, "n": 512}},
    "flow": {"c_cfl": 0.05, "max_time": 10.0, "a_stop": 400.0},
    "diagnostics": {"cadence": 120, "noncollapse": True},
}


@pytest.fixture(scope="module")
def dumbbell_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("dumbbell_run")
    t0 = time.time()
    result = run(DUMBBELL_CFG, out_dir=str(out))
    result.wall = time.time() - t0
    return result


@pytest.fixture(scope="module")
def limacon_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("limacon_run")
    result = run(LIMACON_CFG, out_dir=str(out))
    return result


# ---------------------------------------------------------------------------
# criterion 1: shrinking-circle exactness
# ---------------------------------------------------------------------------

def test_criterion_circle_exactness():
    t0 = time.time()
    cfg = {
        "schema": 1,
        "scenario": {"name": "circle", "params": {"r": 1.0, "n": 512}},
        "flow": {"c_cfl": 0.1, "max_time": 0.455, "a_stop": 1e4},
        "diagnostics": {"cadence": 4000, "noncollapse": True, "viscosity": True},
    }
    result = run(cfg)
    r_errs, a_errs = [], []
    for snap in result.snapshots:
        r = float(np.linalg.norm(snap.surface.vertices, axis=1).mean())
        exact = np.sqrt(1 - 2 * snap.time)
        if exact >= 0.3:
            r_errs.append(abs(r - exact) / exact)
    for t, a, _ in result.alpha_rows:
        a_errs.append(abs(a - 1.0))
    res_rel = [abs(s.r_inner) / s.scale for s in result.residual_samples]
    wall = time.time() - t0
    ok = (max(r_errs) < 1e-3 and max(a_errs) < 5e-2
          and max(res_rel) < 5e-2 and wall < 30.0)
    _report("shrinking-circle exactness",
            ok, f"max radius rel err {max(r_errs):.2e} (<1e-3), "
                f"max |alpha-1| {max(a_errs):.2e} (<5e-2), "
                f"max |R_inner|/scale {max(res_rel):.2e} (<5e-2), wall {wall:.1f}s (<30)")


# ---------------------------------------------------------------------------
# criterion 2: shrinking-sphere exactness
# ---------------------------------------------------------------------------

def test_criterion_sphere_exactness():
    t0 = time.time()
    cfg = {
        "schema": 1,
        "scenario": {"name": "sphere", "params": {"r": 1.0, "subdivisions": 4}},
        "flow": {"c_cfl": 0.1, "max_time": 0.2, "a_stop": 1e4},
        "diagnostics": {"cadence": 120, "noncollapse": True, "monitors": True},
    }
    result = run(cfg)
    r_errs, a_errs, zh_errs = [], [], []
    for snap in result.snapshots:
        c = snap.surface.vertices.mean(axis=0)
        r = float(np.linalg.norm(snap.surface.vertices - c, axis=1).mean())
        r_errs.append(abs(r - np.sqrt(1 - 4 * snap.time)))
    for t, a, _ in result.alpha_rows:
        a_errs.append(abs(a - 2.0))
    for t, g, zh_top, zh_max in result.monitor_rows:
        zh_errs.append(abs(zh_top - 0.5))
    wall = time.time() - t0
    ok = (max(r_errs) < 1e-2 and max(a_errs) < 5e-2
          and max(zh_errs) < 2e-2 and wall < 300.0)
    _report("shrinking-sphere exactness",
            ok, f"max radius err {max(r_errs):.2e} (<1e-2), "
                f"max |alpha-2| {max(a_errs):.2e} (<5e-2), "
                f"max |Zbar/H - 1/2| {max(zh_errs):.2e} (<2e-2), wall {wall:.0f}s (<300)")


# ---------------------------------------------------------------------------
# criterion 3: visible-set correctness on the limaçon
# ---------------------------------------------------------------------------

def test_criterion_limacon_visibility():
    sc = make_limacon()
    cd = compute_curvature(sc.surface)
    dc = build_domain(sc.surface, sc.domain_hints)
    tr = Tracer(dc)
    wk = DoublePointWalker(sc.surface)
    n = sc.surface.n_vertices
    eps_self = EPS_SELF_REL * sc.surface.bbox_diameter()
    mismatches = 0
    min_chord = np.inf
    for x in range(n):
        vs = visible_set(dc, sc.surface, cd, x, tr)
        got = set(vs.members.tolist())
        want = {y for y in range(n) if y != x and wk.visible(x, y)}
        if got != want:
            mismatches += 1
        if len(vs.chord_lengths):
            min_chord = min(min_chord, float(vs.chord_lengths.min()))
    sup_all = all_pairs_sup_Z(sc.surface, cd)
    rep = inner_sphere_curvature(sc.surface, cd, dc, tr)
    zbar_max = float(np.nanmax(rep.zbar))
    ok = (mismatches == 0 and sup_all > 1e3 and zbar_max < 500.0
          and min_chord >= eps_self)
    _report("visible-set correctness (limaçon)",
            ok, f"membership mismatches {mismatches}/512 (=0), "
                f"all-pairs sup Z {sup_all:.0f} (>1e3), visible Zbar max "
                f"{zbar_max:.1f} (<500), min visible chord {min_chord:.2e} "
                f"(>= eps_self {eps_self:.2e})")


# ---------------------------------------------------------------------------
# criterion 4: sphere-lemma oracle equivalence
# ---------------------------------------------------------------------------

def test_criterion_sphere_lemma_sandwich():
    cases = [
        ("circle", make_circle(1.0, 256)),
        ("ellipse", make_ellipse(2.0, 1.0, 256)),
        ("limacon", make_limacon()),
        ("dumbbell", make_dumbbell(n_axial=44, n_phi=40)),
    ]
    fails = {}
    for name, sc in cases:
        cd = compute_curvature(sc.surface)
        dc = build_domain(sc.surface, sc.domain_hints)
        tr = Tracer(dc)
        rep = inner_sphere_curvature(sc.surface, cd, dc, tr)
        bad = 0
        for x in range(sc.surface.n_vertices):
            hi = sphere_lemma_oracle(sc.surface, cd, dc, x, rep.zbar[x] * 1.01, tr)
            lo = sphere_lemma_oracle(sc.surface, cd, dc, x, rep.zbar[x] * 0.99, tr)
            if not (hi["fits"] and not lo["fits"]):
                bad += 1
        fails[name] = bad
    ok = all(v == 0 for v in fails.values())
    _report("sphere-lemma oracle equivalence", ok,
            f"sandwich exceptions per scenario {fails} (all must be 0)")


# ---------------------------------------------------------------------------
# criterion 5: tangency identity on the ellipse
# ---------------------------------------------------------------------------

def test_criterion_tangency_identity():
    defects = []
    for n in (256, 512):
        sc = make_ellipse(2.0, 1.0, n)
        cd = compute_curvature(sc.surface)
        dc = build_domain(sc.surface, sc.domain_hints)
        rep = inner_sphere_curvature(sc.surface, cd, dc)
        chk = tangency_identity_check(rep, sc.surface, cd)
        defects.append(chk["max_defect"])
    ok = defects[0] < 5e-2 and defects[1] < defects[0]
    _report("tangency identity (ellipse)",
            ok, f"max defect {defects[0]:.2e} (<5e-2) at n=256, "
                f"{defects[1]:.2e} after one refinement (strictly smaller)")


# ---------------------------------------------------------------------------
# criteria 6 and 9: the dumbbell run
# ---------------------------------------------------------------------------

def test_criterion_dumbbell_noncollapse(dumbbell_run):
    result = dumbbell_run
    assert result.surgery_events, "no surgery event recorded"
    t_surgery = result.surgery_events[0]["t"]
    alphas = [(t, a) for t, a, _ in result.alpha_rows if t <= t_surgery]
    a0 = alphas[0][1]
    a_min = min(a for _, a in alphas)
    emb = result.embedding_rows
    worst_drop = 0.0
    for k in range(1, len(emb)):
        worst_drop = max(worst_drop, emb[k - 1][1] - emb[k][1])
    ok = a_min >= 0.95 * a0 and worst_drop <= 1e-3
    _report("noncollapsedness preservation (dumbbell)",
            ok, f"alpha_inner min/initial {a_min / a0:.4f} (>=0.95) over "
                f"{len(alphas)} snapshots to the trigger, worst embedding-"
                f"distance drop {worst_drop:.2e} (<=1e-3 per step)")


def test_criterion_surgery_pipeline(dumbbell_run):
    result = dumbbell_run
    ev = result.surgery_events
    ext = result.outcome.get("extinctions", [])
    guard_ok1, m1 = h1_scale_guard(SurgeryConfig(h1=1e9, h2=2e9, h3=4e9, l0=10, theta=2), 0.1)
    guard_ok2, m2 = h1_scale_guard(SurgeryConfig(h1=1e7, h2=2e7, h3=4e7, l0=10, theta=2), 0.1)
    arithmetic_ok = guard_ok1 and abs(m1 - 5.0) < 1e-12 and \
        (not guard_ok2) and abs(m2 - 0.05) < 1e-12
    override_logged = result.summary["guard_override"] is True
    ok = (len(ev) == 1 and ev[0]["components_after"] == 2 and len(ext) == 2
          and result.outcome["termination"] == "extinct"
          and arithmetic_ok and override_logged)
    _report("surgery pipeline (dumbbell)",
            ok, f"{len(ev)} surgery event (=1), components after "
                f"{ev[0]['components_after'] if ev else '-'} (=2), extinctions "
                f"{len(ext)} (=2), exact guard margins {m1:.2f}/{m2:.2f} "
                f"(=5/0.05), override logged {override_logged}, wall {result.wall:.0f}s")


# ---------------------------------------------------------------------------
# criterion 7: Alexandrov-immersedness preservation on the limaçon
# ---------------------------------------------------------------------------

def test_criterion_limacon_preservation(limacon_run):
    result = limacon_run
    inj_vals = [(t, inj) for t, inj, _, _ in result.inj_rows]
    all_positive = all(i > 0 for _, i in inj_vals)
    t_f, inj_f, pair_f, c_a0_f = result.inj_rows[-1]
    snap = result.snapshots[-1]
    cd = snap.curvature
    p, q = pair_f
    nu_dot = float(np.dot(cd.normals[p], cd.normals[q]))
    ok = (all_positive and result.outcome["termination"] == "singularity"
          and nu_dot < -0.9)
    _report("Alexandrov-immersedness preservation (limaçon)",
            ok, f"inj > 0 at all {len(inj_vals)} snapshots (min "
                f"{min(i for _, i in inj_vals):.4f}), final min-inj pair "
                f"normal dot {nu_dot:.3f} (<-0.9) at C_A0 {c_a0_f:.0f}")


# ---------------------------------------------------------------------------
# criterion 8: grim-reaper exclusion
# ---------------------------------------------------------------------------

def test_criterion_grim_reaper_exclusion():
    sc = make_grim_reaper()
    cd = compute_curvature(sc.surface)
    dc = build_domain(sc.surface, sc.domain_hints)
    rep = inner_sphere_curvature(sc.surface, cd, dc)
    mon = estimate_monitors(sc.surface, cd, rep)
    n_arc = 400
    tails = np.abs(sc.surface.vertices[:n_arc, 0]) > 1.35
    zh_tails = float(np.nanmax(mon["zh"][:n_arc][tails]))
    ok = zh_tails > 10.0
    _report("grim-reaper exclusion",
            ok, f"Zbar/H on soliton tails {zh_tails:.1f} (>10)")


# ---------------------------------------------------------------------------
# criterion 10: determinism
# ---------------------------------------------------------------------------

def test_criterion_determinism(tmp_path):
    configs = {
        "circle": {"schema": 1, "scenario": {"name": "circle", "params": {"n": 128}},
                   "flow": {"c_cfl": 0.1, "max_time": 0.08, "a_stop": 1e4},
                   "diagnostics": {"cadence": 150, "noncollapse": True, "monitors": True}},
        "limacon": {"schema": 1, "scenario": {"name": "limacon",
                                              "params": {"focus": 0.0, "n": 128}},
                    "flow": {"c_cfl": 0.05, "max_time": 0.002, "a_stop": 1e4},
                    "diagnostics": {"cadence": 100, "noncollapse": True}},
        "sphere": {"schema": 1, "scenario": {"name": "sphere", "params": {"subdivisions": 2}},
                   "flow": {"c_cfl": 0.05, "max_time": 0.02, "a_stop": 1e4},
                   "diagnostics": {"cadence": 30, "noncollapse": True}},
        "dumbbell": {"schema": 1, "scenario": {"name": "dumbbell",
                                               "params": {"n_axial": 28, "n_phi": 20}},
                     "flow": {"c_cfl": 0.05, "max_time": 0.003, "a_stop": 2500.0},
                     "shell": {"enabled": True},
                     "diagnostics": {"cadence": 40, "noncollapse": True}},
    }
    differing = []
    for name, cfg in configs.items():
        payloads = []
        for k in (1, 2):
            d = tmp_path / f"{name}-{k}"
            run(cfg, out_dir=str(d))
            payloads.append({f: open(os.path.join(d, f), "rb").read()
                             for f in sorted(os.listdir(d)) if f.endswith(".csv")})
        if payloads[0] != payloads[1]:
            differing.append(name)
    ok = not differing
    _report("determinism", ok,
            f"bitwise-identical CSVs for {sorted(configs)} (differing: {differing})")
