"""File formats.

POLYLINE (curves):           OBJ (meshes):         DOMAIN (complexes):
    POLYLINE                     v x y z               DOMAIN
    # comment                    f i j k  (1-based)    dim D
    closed 1                                           vertices V
    orientation 1                                      x y [z] tag
    x y                                                simplices S
    ...                                                i j k [l]
                                                       boundary B
The polyline closes implicitly.                        complex_id surface_id
                                                       branch K
                                                       id...

Per-vertex diagnostics CSV columns (fixed order):
    t,vertex,H,kappa_max,Zbar,partner,partner_class,Zlow,alpha_inner,
    alpha_outer,R_inner,R_outer,grad_monitor,zh_monitor
Flow CSV columns: t,dt,C_A0,minH,maxH
"""
from __future__ import annotations

import json
import os

import numpy as np

from .domain import DomainComplex
from .mesh import DiscreteHypersurface

DIAG_COLUMNS = ("t", "vertex", "H", "kappa_max", "Zbar", "partner", "partner_class",
                "Zlow", "alpha_inner", "alpha_outer", "R_inner", "R_outer",
                "grad_monitor", "zh_monitor")
FLOW_COLUMNS = ("t", "dt", "C_A0", "minH", "maxH")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    if isinstance(x, float) and np.isnan(x):
        return ""
    return repr(float(x))


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------

def write_surface(path: str, surf: DiscreteHypersurface) -> None:
    if surf.dimension == 1:
        with open(path, "w") as fh:
            fh.write("POLYLINE\n")
            fh.write(f"closed {1 if surf.closed else 0}\n")
            fh.write(f"orientation {surf.orientation}\n")
            for p in surf.vertices:
                fh.write(f"{_fmt(p[0])} {_fmt(p[1])}\n")
    else:
        with open(path, "w") as fh:
            if surf.orientation != 1:
                fh.write(f"# orientation {surf.orientation}\n")
            for p in surf.vertices:
                fh.write(f"v {_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}\n")
            for t in surf.faces:
                fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def read_surface(path: str) -> DiscreteHypersurface:
    with open(path) as fh:
        first = fh.readline().strip()
        if first == "POLYLINE":
            closed, orientation = True, 1
            pts = []
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if line.startswith("closed"):
                    closed = bool(int(line.split()[1]))
                elif line.startswith("orientation"):
                    orientation = int(line.split()[1])
                else:
                    pts.append([float(u) for u in line.split()])
            return DiscreteHypersurface(1, np.array(pts), None, orientation, closed)
        # OBJ
        verts, faces = [], []
        orientation = 1
        lines = [first] + fh.read().splitlines()
        for line in lines:
            line = line.strip()
            if line.startswith("# orientation"):
                orientation = int(line.split()[-1])
            elif line.startswith("v "):
                verts.append([float(u) for u in line.split()[1:4]])
            elif line.startswith("f "):
                faces.append([int(u.split("/")[0]) - 1 for u in line.split()[1:4]])
        return DiscreteHypersurface(2, np.array(verts), np.array(faces, dtype=np.int64),
                                    orientation)


def write_domain(path: str, dc: DomainComplex) -> None:
    with open(path, "w") as fh:
        fh.write("DOMAIN\n")
        fh.write(f"dim {dc.dimension}\n")
        fh.write(f"vertices {len(dc.vertices)}\n")
        tags = dc.vertex_tags if dc.vertex_tags is not None else np.zeros(len(dc.vertices), dtype=int)
        for p, tag in zip(dc.vertices, tags):
            fh.write(" ".join(_fmt(c) for c in p) + f" {int(tag)}\n")
        fh.write(f"simplices {len(dc.simplices)}\n")
        for s in dc.simplices:
            fh.write(" ".join(str(int(v)) for v in s) + "\n")
        bpairs = [(ci, si) for ci, si in enumerate(dc.boundary_map) if si >= 0]
        fh.write(f"boundary {len(bpairs)}\n")
        for ci, si in bpairs:
            fh.write(f"{ci} {si}\n")
        fh.write(f"branch {len(dc.branch_vertices)}\n")
        for b in dc.branch_vertices:
            fh.write(f"{int(b)}\n")


def read_domain(path: str) -> dict:
    """Raw domain records (the complex is rebuilt against its surface)."""
    with open(path) as fh:
        assert fh.readline().strip() == "DOMAIN"
        dim = int(fh.readline().split()[1])
        nv = int(fh.readline().split()[1])
        verts, tags = [], []
        for _ in range(nv):
            row = fh.readline().split()
            verts.append([float(u) for u in row[:dim]])
            tags.append(int(row[dim]))
        ns = int(fh.readline().split()[1])
        simplices = [[int(u) for u in fh.readline().split()] for _ in range(ns)]
        nb = int(fh.readline().split()[1])
        bmap = [[int(u) for u in fh.readline().split()] for _ in range(nb)]
        nk = int(fh.readline().split()[1])
        branch = [int(fh.readline()) for _ in range(nk)]
    return {"dim": dim, "vertices": np.array(verts), "tags": np.array(tags, dtype=np.int64),
            "simplices": np.array(simplices, dtype=np.int64),
            "boundary": np.array(bmap, dtype=np.int64),
            "branch": np.array(branch, dtype=np.int64)}


# ---------------------------------------------------------------------------
# CSV / summary
# ---------------------------------------------------------------------------

class CsvWriter:
    def __init__(self, path: str, columns):
        self.path = path
        self.columns = tuple(columns)
        self._fh = open(path, "w")
        self._fh.write(",".join(self.columns) + "\n")

    def row(self, values: dict) -> None:
        missing = set(values) - set(self.columns)
        if missing:
            raise ValueError(f"unknown CSV columns {sorted(missing)}")
        self._fh.write(",".join(_fmt(values.get(c)) if not isinstance(values.get(c), str)
                                else values.get(c) for c in self.columns) + "\n")

    def close(self) -> None:
        self._fh.close()


def read_csv(path: str) -> dict:
    """Columns as numpy arrays (strings preserved for non-numeric columns)."""
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


def write_summary(path: str, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def output_root(default: str = ".") -> str:
    return os.environ.get("MCFLAB_OUTPUT_ROOT", default)
