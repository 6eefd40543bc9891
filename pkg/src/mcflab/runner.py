"""Deterministic run orchestration: flow + diagnostics + surgery + files.

A run executes the flow with hooks at the diagnostic cadence.  The hook
pipeline per snapshot: carry the filling domain along (collar update with
rebuild fallback), certified noncollapse report, optional outer report
against the static shell, viscosity-residual windows, estimate monitors, and
the surgery check.  All file output goes through io.py; two runs of the same
config produce byte-identical CSVs.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import io as mio
from .comparison import ComparisonShell, build_outer_shell, embedding_monitor, rebuild_region
from .config import flow_config, load_config, surgery_config
from .curvature import compute_curvature
from .domain import DomainComplex, build_domain, update_domain_immersion
from .errors import (McflabError, NotMeanConvex, NotMeanConvexShell, OffsetDegenerate,
                     RecollarNeeded)
from .flow import FlowConfig, FlowState, run_flow
from .mesh import DiscreteHypersurface
from .noncollapse import (NoncollapseReport, estimate_monitors, inner_sphere_curvature,
                          outer_sphere_curvature, viscosity_residuals)
from .scenarios import Scenario, generate
from .surgery import detect_neck, h1_scale_guard, perform_surgery
from .tracing import Tracer
from .visibility import injectivity_radius_proxy


@dataclass
class RunResult:
    outcome: dict
    snapshots: list
    reports: list                  # (time, NoncollapseReport)
    alpha_rows: list               # (t, alpha_inner, alpha_outer)
    inj_rows: list                 # (t, inj, pair, c_a0)
    monitor_rows: list             # (t, gradient_monitor, zh_top, zh_max)
    residual_samples: list
    embedding_rows: list
    surgery_events: list
    summary: dict
    out_dir: str | None = None


class _DiagnosticPipeline:
    def __init__(self, scenario: Scenario, cfg: dict):
        self.scenario = scenario
        self.cfg = cfg
        self.diag = cfg["diagnostics"]
        self.surgery_cfg = surgery_config(cfg) if cfg["surgery"]["enabled"] else None
        self.domain = None
        self.shell = None
        self.prev = None            # (surface, curvature) at the previous snapshot
        self.window = []            # rolling (t, surface, curvature) for residuals
        self.window_reports = []
        self.reports = []
        self.alpha_rows = []
        self.inj_rows = []
        self.monitor_rows = []
        self.residual_samples = []
        self.embedding_rows = []
        self.surgery_events = []
        self.recollar_count = 0
        self.post_surgery = False
        self.r0 = None
        self.diag_rows = []         # per-vertex CSV rows

    # -- domain maintenance --------------------------------------------------

    def _ensure_domain(self, state: FlowState):
        if self.post_surgery:
            self.domain = None
            return
        surf, curv = state.surface, state.curvature
        if self.domain is None:
            self.domain = build_domain(surf, self._hints(surf))
            self.prev = (surf, curv)
            return
        delta = self.diag["collar_delta"] or 0.2 / np.sqrt(max(curv.c_a0, 1e-12))
        delta = min(delta, 0.45 / np.sqrt(max(curv.c_a0, 1e-12)))
        try:
            self.domain = update_domain_immersion(self.domain, self.prev[0], self.prev[1],
                                                  surf, curv, delta)
        except (RecollarNeeded, McflabError):
            self.recollar_count += 1
            self.domain = build_domain(surf, self._hints(surf))
        self.prev = (surf, curv)

    def _hints(self, surf: DiscreteHypersurface) -> dict:
        hints = dict(self.scenario.domain_hints)
        if hints.get("kind") == "revolution":
            # re-derive axis stations from the flowed rings (combinatorics fixed)
            n_phi = hints["n_phi"]
            n_rings = (surf.n_vertices - 2) // n_phi
            xs = [surf.vertices[0, 0]]
            rs = [0.0]
            for i in range(n_rings):
                ring = surf.vertices[1 + i * n_phi: 1 + (i + 1) * n_phi]
                xs.append(float(ring[:, 0].mean()))
                rs.append(float(np.hypot(ring[:, 1], ring[:, 2]).mean()))
            xs.append(surf.vertices[-1, 0])
            rs.append(0.0)
            hints["profile_x"] = np.array(xs)
            hints["profile_rho"] = np.array(rs)
        return hints

    # -- the hook ------------------------------------------------------------

    def __call__(self, state: FlowState):
        t = state.time
        surf, curv = state.surface, state.curvature
        replacement = None

        if self.diag["noncollapse"] and not self.post_surgery:
            self._ensure_domain(state)
            tracer = Tracer(self.domain)
            rep = inner_sphere_curvature(surf, curv, self.domain, tracer)
            rep.time = t
            outer_rep = None
            if self.shell is not None and surf.n_vertices == self.shell.surface0.n_vertices:
                region = rebuild_region(self.shell, surf)
                outer_rep = outer_sphere_curvature(surf, curv, region)
                rep.zlow = outer_rep.zlow
                rep.alpha_outer = outer_rep.alpha_outer
            self.reports.append((t, rep))
            self.alpha_rows.append((t, rep.alpha_inner, rep.alpha_outer))
            inj, pair = injectivity_radius_proxy(self.domain, surf, curv,
                                                 tracer=tracer, return_pair=True)
            self.inj_rows.append((t, inj, pair, curv.c_a0))
            mon = {}
            if self.diag["monitors"]:
                mon = estimate_monitors(surf, curv, rep)
                self.monitor_rows.append((t, mon.get("gradient_monitor"),
                                          mon.get("zh_top_decile"), mon.get("zh_max")))
            self._collect_rows(t, surf, curv, rep, mon)
            if self.diag["viscosity"]:
                self._push_window(t, surf, curv, rep)

        if self.shell is not None:
            try:
                self.embedding_rows.extend(embedding_monitor(
                    self.shell, [type("S", (), {"surface": surf, "time": t})()]))
            except McflabError:
                raise

        if self.surgery_cfg is not None and surf.dimension == 2 and not self.post_surgery:
            replacement = self._maybe_surgery(state)
        return replacement

    def _collect_rows(self, t, surf, curv, rep, mon):
        zh = mon.get("zh") if mon else None
        for x in range(surf.n_vertices):
            self.diag_rows.append({
                "t": t, "vertex": x, "H": curv.mean[x], "kappa_max": curv.kappa_max[x],
                "Zbar": rep.zbar[x], "partner": int(rep.partner[x]),
                "partner_class": rep.partner_class[x],
                "Zlow": rep.zlow[x] if rep.zlow is not None else None,
                "alpha_inner": rep.alpha_inner, "alpha_outer": rep.alpha_outer,
                "R_inner": None, "R_outer": None,
                "grad_monitor": mon.get("gradient_monitor") if mon else None,
                "zh_monitor": zh[x] if zh is not None else None,
            })

    def _push_window(self, t, surf, curv, rep):
        self.window.append((t, surf, curv))
        self.window_reports.append(rep)
        if len(self.window) > 3:
            self.window.pop(0)
            self.window_reports.pop(0)
        if len(self.window) == 3:
            try:
                self.residual_samples.extend(
                    viscosity_residuals(self.window, self.window_reports))
            except McflabError:
                pass

    def _maybe_surgery(self, state: FlowState):
        curv = state.curvature
        if float(curv.mean.max()) < self.surgery_cfg.h3:
            return None
        if self.r0 is None:
            return None
        ok, margin = h1_scale_guard(self.surgery_cfg, self.r0)
        if not ok:
            return None
        exact_guard = self.surgery_cfg.guard_factor >= 1e6
        necks = detect_neck(state.surface, curv, self.surgery_cfg)
        if exact_guard:
            # the locality requirement: a lab-scale override waives it (logged)
            necks = [n for n in necks if n.bounding_radius < self.r0]
        if not necks:
            return None
        pre_alpha = self.reports[-1][1].alpha_inner if self.reports else np.nan
        new_surf = perform_surgery(state.surface, necks[0], self.surgery_cfg,
                                   data=curv)
        comps = new_surf.connected_components()
        new_curv = compute_curvature(new_surf)
        post_alphas = _component_alphas(new_surf, new_curv)
        self.surgery_events.append({
            "t": state.time, "neck_rho": necks[0].rho,
            "bounding_radius": necks[0].bounding_radius,
            "containment_ok": bool(necks[0].bounding_radius < self.r0),
            "guard_margin": margin, "components_before": 1,
            "components_after": len(comps), "alpha_pre": pre_alpha,
            "alpha_post_components": post_alphas,
        })
        self.post_surgery = True
        return FlowState(state.time, new_surf, new_curv, state.step, None,
                         state.history)


def _component_alphas(surf: DiscreteHypersurface, curv) -> list:
    """Per-component alpha_inner right after surgery (star-shaped fillings)."""
    out = []
    comps = surf.connected_components()
    for comp in comps:
        mask = np.zeros(surf.n_vertices, dtype=bool)
        mask[comp] = True
        fmask = mask[surf.faces].all(axis=1)
        remap = -np.ones(surf.n_vertices, dtype=np.int64)
        remap[comp] = np.arange(len(comp))
        sub = DiscreteHypersurface(2, surf.vertices[comp], remap[surf.faces[fmask]],
                                   surf.orientation)
        try:
            sub_curv = compute_curvature(sub)
            dc = build_domain(sub, {"kind": "star-shaped"})
            rep = inner_sphere_curvature(sub, sub_curv, dc)
            out.append(float(rep.alpha_inner))
        except McflabError:
            out.append(float("nan"))
    return out


def run(config, out_dir: str | None = None) -> RunResult:
    """Execute a configured run; optionally write all artifacts to out_dir."""
    cfg = load_config(config)
    scenario = generate(cfg["scenario"]["name"], **cfg["scenario"]["params"])
    state = FlowState.initial(scenario.surface, clamp_mask=scenario.clamp_mask)
    fcfg = flow_config(cfg)

    pipe = _DiagnosticPipeline(scenario, cfg)
    if cfg["shell"]["enabled"]:
        delta = cfg["shell"]["delta"]
        if delta is None:
            delta = 0.25 / np.sqrt(state.curvature.c_a0)
        try:
            pipe.shell = build_outer_shell(state.surface, state.curvature, delta)
            pipe.r0 = pipe.shell.r0
        except (OffsetDegenerate, NotMeanConvexShell, NotMeanConvex):
            raise
    if pipe.surgery_cfg is not None and pipe.r0 is None:
        # surgery needs r0; a shell-less run measures it from a default shell
        delta = cfg["shell"]["delta"] or 0.25 / np.sqrt(state.curvature.c_a0)
        pipe.shell = build_outer_shell(state.surface, state.curvature, delta)
        pipe.r0 = pipe.shell.r0

    # run the initial diagnostics before the first step
    pipe(state)
    snaps, outcome = run_flow(state, fcfg, hooks=(pipe,),
                              snapshot_every=cfg["diagnostics"]["cadence"],
                              component_extinction=pipe.surgery_cfg is not None)

    summary = {
        "scenario": cfg["scenario"],
        "termination": outcome["termination"],
        "final_time": outcome.get("time"),
        "final_c_a0": outcome.get("c_a0"),
        "extinctions": [list(e) for e in outcome.get("extinctions", [])],
        "r0": pipe.r0,
        "guard_margin": (h1_scale_guard(pipe.surgery_cfg, pipe.r0)[1]
                         if pipe.surgery_cfg is not None and pipe.r0 else None),
        "guard_factor": cfg["surgery"]["guard_factor"],
        "guard_override": cfg["surgery"]["guard_factor"] < 1e6,
        "alpha_timeline": [list(r) for r in pipe.alpha_rows],
        "inj_timeline": [[r[0], r[1], list(r[2]), r[3]] for r in pipe.inj_rows],
        "surgery_events": pipe.surgery_events,
        "recollar_count": pipe.recollar_count,
        "seed": cfg["seed"],
    }

    result = RunResult(outcome, snaps, pipe.reports, pipe.alpha_rows, pipe.inj_rows,
                       pipe.monitor_rows, pipe.residual_samples, pipe.embedding_rows,
                       pipe.surgery_events, summary, out_dir)
    if out_dir is not None:
        _write_artifacts(result, cfg, snaps, pipe, out_dir)
    return result


def _write_artifacts(result: RunResult, cfg, snaps, pipe, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    flow_csv = mio.CsvWriter(os.path.join(out_dir, "flow.csv"), mio.FLOW_COLUMNS)
    for row in result.outcome.get("history", []):
        flow_csv.row(dict(zip(mio.FLOW_COLUMNS, row)))
    flow_csv.close()

    diag_csv = mio.CsvWriter(os.path.join(out_dir, "noncollapse.csv"), mio.DIAG_COLUMNS)
    for row in pipe.diag_rows:
        diag_csv.row(row)
    diag_csv.close()

    if cfg["output"]["snapshots"]:
        for k, snap in enumerate(snaps):
            ext = "polyline" if snap.surface.dimension == 1 else "obj"
            mio.write_surface(os.path.join(out_dir, f"snapshot_{k:04d}.{ext}"),
                              snap.surface)
    if pipe.embedding_rows:
        emb = mio.CsvWriter(os.path.join(out_dir, "embedding.csv"), ("t", "distance"))
        for t, d in pipe.embedding_rows:
            emb.row({"t": t, "distance": d})
        emb.close()
    if pipe.residual_samples:
        res = mio.CsvWriter(os.path.join(out_dir, "residuals.csv"),
                            ("t", "vertex", "R_inner", "R_outer", "scale"))
        for s in pipe.residual_samples:
            res.row({"t": s.time, "vertex": s.vertex, "R_inner": s.r_inner,
                     "R_outer": s.r_outer, "scale": s.scale})
        res.close()
    mio.write_summary(os.path.join(out_dir, "summary.json"), result.summary)
