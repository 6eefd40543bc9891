"""Batch figures from a run directory.

Reads only the documented run artifacts (flow.csv, noncollapse.csv,
residuals.csv, embedding.csv, summary.json, snapshot_*.polyline/.obj) and
never reinterprets numbers: every plotted value comes straight out of the
files, and render() returns the plotted arrays so tests can check the
round trip.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from matplotlib.collections import LineCollection

FIGURE_KINDS = ("snapshot-heat", "alpha-timeline", "residual-scatter",
                "inj-decay", "monitor-ratios")


class SchemaError(RuntimeError):
    pass


@dataclass
class FigureSpec:
    run_dir: str
    kind: str
    out_path: str
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; choose from {FIGURE_KINDS}")
        if not os.path.isdir(self.run_dir):
            raise SchemaError(f"run directory {self.run_dir!r} does not exist")


def read_csv(path: str) -> dict:
    if not os.path.exists(path):
        raise SchemaError(f"missing artifact {os.path.basename(path)!r}")
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    out = {}
    for k, name in enumerate(header):
        col = [r[k] if k < len(r) else "" for r in rows]
        try:
            out[name] = np.array([float(c) if c != "" else np.nan for c in col])
        except ValueError:
            out[name] = np.array(col)
    return out


def _need(table: dict, columns, artifact: str):
    for c in columns:
        if c not in table:
            raise SchemaError(f"artifact {artifact!r} lacks column {c!r}")


def _summary(run_dir: str) -> dict:
    path = os.path.join(run_dir, "summary.json")
    if not os.path.exists(path):
        raise SchemaError("missing artifact 'summary.json'")
    with open(path) as fh:
        return json.load(fh)


def read_polyline(path: str) -> np.ndarray:
    pts = []
    with open(path) as fh:
        assert fh.readline().strip() == "POLYLINE"
        for line in fh:
            line = line.strip()
            if not line or line.startswith(("#", "closed", "orientation")):
                continue
            pts.append([float(u) for u in line.split()])
    return np.array(pts)


def read_obj(path: str):
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            if line.startswith("v "):
                verts.append([float(u) for u in line.split()[1:4]])
            elif line.startswith("f "):
                faces.append([int(u.split("/")[0]) - 1 for u in line.split()[1:4]])
    return np.array(verts), np.array(faces, dtype=int)


def _last_snapshot(run_dir: str):
    snaps = sorted(f for f in os.listdir(run_dir) if f.startswith("snapshot_"))
    if not snaps:
        raise SchemaError("run directory holds no snapshot geometry")
    return os.path.join(run_dir, snaps[-1])


def render(spec: FigureSpec) -> dict:
    """Write the figure and return the plotted arrays (for round-trip checks)."""
    fig, ax = plt.subplots(figsize=spec.style.get("figsize", (6.4, 4.8)),
                           dpi=spec.style.get("dpi", 110))
    try:
        data = _RENDERERS[spec.kind](spec, ax)
        fig.tight_layout()
        fig.savefig(spec.out_path, metadata={"Software": None}
                    if spec.out_path.endswith(".png") else None)
    finally:
        plt.close(fig)
    return data


def _render_snapshot_heat(spec: FigureSpec, ax) -> dict:
    nc = read_csv(os.path.join(spec.run_dir, "noncollapse.csv"))
    _need(nc, ("t", "vertex", "Zbar", "H"), "noncollapse.csv")
    t_last = nc["t"].max()
    sel = nc["t"] == t_last
    values = nc["Zbar"][sel]
    order = np.argsort(nc["vertex"][sel].astype(int))
    values = values[order]
    path = _last_snapshot(spec.run_dir)
    if path.endswith(".polyline"):
        pts = read_polyline(path)
        m = min(len(pts), len(values))
        segs = np.stack([pts[:m], np.roll(pts[:m], -1, axis=0)], axis=1)
        vals = values[:m]
        lc = LineCollection(segs, cmap=spec.style.get("cmap", "viridis"))
        lc.set_array(vals)
        ax.add_collection(lc)
        ax.autoscale()
        ax.set_aspect("equal")
        plt.colorbar(lc, ax=ax, label="Zbar")
        plotted = vals
    else:
        verts, _ = read_obj(path)
        m = min(len(verts), len(values))
        sc = ax.scatter(verts[:m, 0], verts[:m, 1], c=values[:m], s=4,
                        cmap=spec.style.get("cmap", "viridis"))
        ax.set_aspect("equal")
        plt.colorbar(sc, ax=ax, label="Zbar")
        plotted = values[:m]
    ax.set_title(f"Zbar heat at t={t_last:.5g}")
    return {"values": plotted, "t": t_last}


def _render_alpha_timeline(spec: FigureSpec, ax) -> dict:
    summary = _summary(spec.run_dir)
    rows = summary.get("alpha_timeline")
    if not rows:
        raise SchemaError("summary.json lacks field 'alpha_timeline'")
    t = np.array([r[0] for r in rows])
    a_in = np.array([r[1] for r in rows], dtype=float)
    a_out = np.array([r[2] if r[2] is not None else np.nan for r in rows], dtype=float)
    ax.plot(t, a_in, "o-", label="alpha_inner")
    if np.isfinite(a_out).any():
        ax.plot(t, a_out, "s--", label="alpha_outer")
    ax.set_xlabel("t")
    ax.set_ylabel("alpha")
    ax.legend()
    return {"t": t, "alpha_inner": a_in, "alpha_outer": a_out}


def _render_residual_scatter(spec: FigureSpec, ax) -> dict:
    res = read_csv(os.path.join(spec.run_dir, "residuals.csv"))
    _need(res, ("t", "vertex", "R_inner", "scale"), "residuals.csv")
    ax.scatter(res["t"], res["R_inner"], s=6, label="R_inner")
    ax.axhline(0.0, color="k", lw=0.6)
    ax.set_xlabel("t")
    ax.set_ylabel("viscosity residual")
    ax.legend()
    return {"t": res["t"], "R_inner": res["R_inner"]}


def _render_inj_decay(spec: FigureSpec, ax) -> dict:
    summary = _summary(spec.run_dir)
    rows = summary.get("inj_timeline")
    if not rows:
        raise SchemaError("summary.json lacks field 'inj_timeline'")
    t = np.array([r[0] for r in rows])
    inj = np.array([r[1] for r in rows])
    ax.plot(t, inj, "o-")
    ax.set_xlabel("t")
    ax.set_ylabel("injectivity-radius proxy")
    return {"t": t, "inj": inj}


def _render_monitor_ratios(spec: FigureSpec, ax) -> dict:
    nc = read_csv(os.path.join(spec.run_dir, "noncollapse.csv"))
    _need(nc, ("t", "zh_monitor"), "noncollapse.csv")
    ts = np.unique(nc["t"])
    zh = np.array([np.nanmax(nc["zh_monitor"][nc["t"] == t]) for t in ts])
    ax.plot(ts, zh, "o-", label="max Zbar/H")
    summary = _summary(spec.run_dir)
    for ev in summary.get("surgery_events", []):
        ax.axvline(ev["t"], color="r", ls=":", label="surgery")
    ax.set_xlabel("t")
    ax.set_ylabel("Zbar/H")
    handles, labels = ax.get_legend_handles_labels()
    seen = dict(zip(labels, handles))
    ax.legend(seen.values(), seen.keys())
    return {"t": ts, "zh": zh}


_RENDERERS = {
    "snapshot-heat": _render_snapshot_heat,
    "alpha-timeline": _render_alpha_timeline,
    "residual-scatter": _render_residual_scatter,
    "inj-decay": _render_inj_decay,
    "monitor-ratios": _render_monitor_ratios,
}
