"""Visible sets: boundary points reachable by straight pullback geodesics,
with Reg/Sing classification, plus the injectivity-radius proxy.

Membership is decided by direct aiming: one trace per candidate target,
batched.  A target is visible iff the ray's first boundary contact happens at
the target vertex itself (arriving on the correct sheet); surface-adjacent
neighbors are visible through their shared boundary edge.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import CurvatureData
from .domain import DomainComplex
from .mesh import DiscreteHypersurface
from .tracing import EPS_TRANS, Tracer, trace_batch

EPS_SELF_REL = 1e-7    # self-intersection tolerance, relative to diameter
REG, SING = "Reg", "Sing"


@dataclass
class VisibleSet:
    base: int
    members: np.ndarray        # surface vertex ids
    classes: list[str]         # Reg / Sing per member
    chord_lengths: np.ndarray
    chord_dirs: np.ndarray     # unit w = (X(x) - X(y)) / d


def _surface_neighbors(surface: DiscreteHypersurface, x: int) -> set[int]:
    if surface.dimension == 1:
        n = surface.n_vertices
        out = set()
        if surface.closed or x + 1 < n:
            out.add((x + 1) % n)
        if surface.closed or x - 1 >= 0:
            out.add((x - 1) % n)
        return out
    f = surface.faces
    rows = f[(f == x).any(axis=1)]
    return set(int(v) for v in np.unique(rows) if v != x)


def _vertex_normal_chord_dot(surface: DiscreteHypersurface, data: CurvatureData,
                             x: int, y: int) -> float:
    d = surface.vertices[y] - surface.vertices[x]
    d = d / np.linalg.norm(d)
    return abs(float(np.dot(d, data.normals[y])))


def check_targets(tr: Tracer, dc: DomainComplex, surface: DiscreteHypersurface,
                  data: CurvatureData, x: int, targets: np.ndarray):
    """Direct-aiming visibility of each target from x.

    Returns (visible boolean array, class list): a target is visible iff the
    aimed ray's first boundary contact is the target vertex itself (surface
    neighbors via their shared boundary edge)."""
    n = surface.n_vertices
    eps_self = EPS_SELF_REL * surface.bbox_diameter()
    px = surface.vertices[x]
    chords = surface.vertices[targets] - px
    dists = np.linalg.norm(chords, axis=1)
    visible = np.zeros(len(targets), dtype=bool)
    classes = [""] * len(targets)

    ok = dists >= eps_self
    neighbors = _surface_neighbors(surface, x)
    is_nbr = np.array([int(t) in neighbors for t in targets]) if len(targets) else \
        np.zeros(0, dtype=bool)
    for row in np.nonzero(is_nbr & ok)[0]:
        visible[row] = True
        dot = _vertex_normal_chord_dot(surface, data, x, int(targets[row]))
        classes[row] = REG if dot > EPS_TRANS else SING

    to_trace = ok & ~is_nbr
    if to_trace.any():
        ti = np.nonzero(to_trace)[0]
        res = trace_batch(tr, int(dc.surface_to_complex[x]), chords[ti],
                          dists[ti] * (1 + 1e-9) + 1e-12)
        hit_tol = 1e-6 * tr.scale
        for k_row, row in enumerate(ti):
            t = int(targets[row])
            code = res["kind"][k_row]
            ep = res["exit_point"][k_row]
            if np.linalg.norm(ep - surface.vertices[t]) > hit_tol:
                continue
            if res["length"][k_row] < dists[row] * (1 - 1e-6):
                continue  # grazed the boundary strictly before the target
            t_c = int(dc.surface_to_complex[t])
            if code in (0, 1):
                # the hit facet must contain the target's complex vertex
                si, k = res["exit_facet"][k_row]
                fac = np.delete(dc.simplices[si], k)
                if t_c not in fac.tolist():
                    continue
                cls = REG if code == 0 else SING
            elif code == 2:
                # ray expired exactly at the target corner: an arrival iff it
                # ended in a simplex incident to the target's complex vertex
                si = int(res["final_simplex"][k_row])
                if t_c not in dc.simplices[si].tolist():
                    continue
                dot = _vertex_normal_chord_dot(surface, data, x, t)
                cls = REG if dot > EPS_TRANS else SING
            else:
                continue
            visible[row] = True
            classes[row] = cls
    return visible, classes


def visible_set(dc: DomainComplex, surface: DiscreteHypersurface, data: CurvatureData,
                x: int, tracer: Tracer | None = None,
                targets: np.ndarray | None = None) -> VisibleSet:
    """All boundary vertices reachable from x by a straight pullback geodesic."""
    tr = tracer or Tracer(dc)
    n = surface.n_vertices
    if targets is None:
        targets = np.array([y for y in range(n) if y != x], dtype=np.int64)
    visible, classes = check_targets(tr, dc, surface, data, x, targets)
    members = targets[visible]
    order = np.argsort(members)
    members = members[order]
    cls = [classes[i] for i in np.nonzero(visible)[0][order]]
    px = surface.vertices[x]
    lens = np.linalg.norm(surface.vertices[members] - px, axis=1)
    with np.errstate(invalid="ignore"):
        w = (px - surface.vertices[members]) / np.maximum(lens[:, None], 1e-300)
    return VisibleSet(x, members, cls, lens, w)


def is_visible(dc: DomainComplex, surface: DiscreteHypersurface, data: CurvatureData,
               x: int, y: int, tracer: Tracer | None = None) -> bool:
    vs = visible_set(dc, surface, data, x, tracer, targets=np.array([y], dtype=np.int64))
    return y in vs.members


def first_return_lengths(dc: DomainComplex, surface: DiscreteHypersurface,
                         data: CurvatureData, max_length: float,
                         tracer: Tracer | None = None) -> np.ndarray:
    """Length of the inward-normal geodesic from each boundary vertex to its
    first boundary return; inf if it exhausts max_length."""
    tr = tracer or Tracer(dc)
    n = surface.n_vertices
    out = np.full(n, np.inf)
    for x in range(n):
        res = trace_batch(tr, int(dc.surface_to_complex[x]),
                          -data.normals[x][None, :], np.array([max_length]))
        if res["kind"][0] in (0, 1):
            out[x] = res["length"][0]
    return out


def injectivity_radius_proxy(dc: DomainComplex, surface: DiscreteHypersurface,
                             data: CurvatureData, max_length: float | None = None,
                             tracer: Tracer | None = None,
                             return_pair: bool = False):
    """inj = min over boundary vertices of min(focal bound, half first-return).

    The focal bound is 1/kappa_max where kappa_max > 0 (infinite otherwise);
    the normal-ray first return is measured in the complex, so it respects
    sheets.  Optionally returns the minimizing vertex pair (x, nearest
    boundary vertex to its return point).
    """
    if max_length is None:
        max_length = 4.0 * surface.bbox_diameter()
    tr = tracer or Tracer(dc)
    ret = first_return_lengths(dc, surface, data, max_length, tr)
    kmax = data.kappa_max
    with np.errstate(divide="ignore"):
        focal = np.where(kmax > 0, 1.0 / np.maximum(kmax, 1e-300), np.inf)
    per_vertex = np.minimum(focal, 0.5 * ret)
    x_star = int(np.argmin(per_vertex))
    inj = float(per_vertex[x_star])
    if not return_pair:
        return inj
    # partner: boundary vertex closest to the return point of the minimizer
    res = trace_batch(tr, int(dc.surface_to_complex[x_star]),
                      -data.normals[x_star][None, :], np.array([max_length]))
    partner = x_star
    if res["kind"][0] in (0, 1) and res["exit_facet"][0][0] >= 0:
        si, k = res["exit_facet"][0]
        fac = np.delete(dc.simplices[si], k)
        cand = [int(dc.boundary_map[c]) for c in fac if dc.boundary_map[c] >= 0]
        if cand:
            ep = res["exit_point"][0]
            partner = min(cand, key=lambda s: np.linalg.norm(surface.vertices[s] - ep))
    return inj, (x_star, partner)
