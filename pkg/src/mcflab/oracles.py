"""Brute-force oracles, independent of the complex tracer.

These re-derive visibility, inscribed-ball fits, and exterior-ball radii from
the raw boundary geometry (segment intersections, vertex scans, region
flood), so agreement with the fast kernels is a two-route check and never a
tautology.
"""
from __future__ import annotations

import numpy as np

from .curvature import CurvatureData
from .domain import DomainComplex, one_double_point_structure, _point_simplex_distance
from .mesh import DiscreteHypersurface
from .tracing import Tracer, trace_batch
from .visibility import EPS_SELF_REL, _surface_neighbors

_T_EPS = 1e-9


# ---------------------------------------------------------------------------
# segment-vs-edges kernels
# ---------------------------------------------------------------------------

def _seg_cross_params(p0, p1, a, b):
    """Crossing parameters (t on p-segment, s on ab-segments) vectorized over
    an (E,2,2)-ish family; returns (t, s) with NaN where parallel."""
    d = p1 - p0
    e = b - a
    denom = d[0] * e[:, 1] - d[1] * e[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = a - p0
        t = (r[:, 0] * e[:, 1] - r[:, 1] * e[:, 0]) / denom
        s = (r[:, 0] * d[1] - r[:, 1] * d[0]) / denom
    t[np.abs(denom) < 1e-300] = np.nan
    return t, s


def segment_polyline_crossings(p0, p1, verts, edge_ids):
    """Proper crossings of segment (p0, p1) with polyline edges edge_ids.

    Returns sorted list of (t, edge_id); endpoints of the segment excluded.
    """
    a = verts[edge_ids]
    b = verts[(edge_ids + 1) % len(verts)]
    t, s = _seg_cross_params(p0, p1, a, b)
    ok = np.isfinite(t) & (t > _T_EPS) & (t < 1 - _T_EPS) & (s > -1e-12) & (s < 1 + 1e-12)
    rows = sorted((float(tt), int(e)) for tt, e in zip(t[ok], edge_ids[ok]))
    return rows


def _seg_cross_single(p0, p1, a, b):
    """Proper crossing with the open chord (a, b): endpoint touches excluded."""
    t, s = _seg_cross_params(p0, p1, a[None, :], b[None, :])
    if np.isfinite(t[0]) and _T_EPS < t[0] < 1 - _T_EPS and 1e-9 < s[0] < 1 - 1e-9:
        return float(t[0])
    return None


def direction_enters_interior(surface: DiscreteHypersurface, x: int, u: np.ndarray) -> bool:
    """Does u point into the filling at boundary vertex x?  The interior
    (possibly spanning several sheets) is swept counterclockwise from the
    outgoing edge direction to the incoming one."""
    v = surface.vertices
    n = surface.n_vertices
    d_next = v[(x + 1) % n] - v[x]
    d_prev = v[(x - 1) % n] - v[x]
    a0 = np.arctan2(d_next[1], d_next[0])
    a1 = np.arctan2(d_prev[1], d_prev[0])
    au = np.arctan2(u[1], u[0])
    sweep = (a1 - a0) % (2 * np.pi)
    pos = (au - a0) % (2 * np.pi)
    return 1e-12 < pos < sweep - 1e-12


# ---------------------------------------------------------------------------
# visibility oracle: embedded curves (simple polygon)
# ---------------------------------------------------------------------------

def embedded_curve_visible(surface: DiscreteHypersurface, x: int, y: int) -> bool:
    """y visible from x inside a simple closed polygon iff the open chord
    meets no boundary edge properly (adjacent vertices always visible) and
    its midpoint lies inside."""
    n = surface.n_vertices
    if y == x:
        return False
    if y in _surface_neighbors(surface, x):
        return True
    v = surface.vertices
    eps_self = EPS_SELF_REL * surface.bbox_diameter()
    if np.linalg.norm(v[x] - v[y]) < eps_self:
        return False
    edges = np.array([e for e in range(n) if e not in ((x - 1) % n, x, (y - 1) % n, y)],
                     dtype=np.int64)
    if segment_polyline_crossings(v[x], v[y], v, edges):
        return False
    mid = 0.5 * (v[x] + v[y])
    return _point_in_polygon(mid, v) != 0


def _point_in_polygon(p, verts) -> int:
    """Winding number (0 = outside)."""
    d = verts - p
    ang = np.arctan2(d[:, 1], d[:, 0])
    dd = np.diff(np.concatenate([ang, ang[:1]]))
    dd = (dd + np.pi) % (2 * np.pi) - np.pi
    return int(round(dd.sum() / (2 * np.pi)))


# ---------------------------------------------------------------------------
# visibility oracle: one-double-point immersed curves (piece walker)
# ---------------------------------------------------------------------------

class DoublePointWalker:
    """Sheet-aware segment walker over the two-sheet branched filling.

    Pieces: A (outer fill), B (inner fill), T1 (wedge triangle a,b,m), T2
    (wedge c,d,m).  A segment's lift changes piece exactly when it crosses
    that piece's own boundary chords, and terminates when it crosses one of
    the piece's boundary polyline edges.
    """

    def __init__(self, surface: DiscreteHypersurface):
        self.surface = surface
        self.st = one_double_point_structure(surface)
        self.v = surface.vertices
        self.n = surface.n_vertices
        st = self.st
        self.m = st["m_pos"]
        self.a, self.b, self.c, self.d = st["a"], st["b"], st["c"], st["d"]
        outer = st["outer"]
        inner = st["inner"]
        self.outer_set = set(int(i) for i in outer)
        self.inner_set = set(int(i) for i in inner)
        # polyline edge ids by the arc they belong to; edge i = (v_i, v_{i+1})
        self.outer_edges = np.array([int(i) for i in outer[:-1]], dtype=np.int64)
        self.inner_edges = np.array([int(i) for i in inner[:-1]], dtype=np.int64)
        self.trans_edges = np.array([self.a, self.c], dtype=np.int64)  # (a,b), (c,d)

    # chords: (a,m), (m,d) switch A <-> wedge; (b,m), (m,c) switch wedge <-> B
    def _chord(self, name):
        p = {"am": (self.v[self.a], self.m), "md": (self.m, self.v[self.d]),
             "bm": (self.v[self.b], self.m), "mc": (self.m, self.v[self.c])}[name]
        return p

    def _events(self, p0, p1):
        ev = []
        for eid in segment_polyline_crossings(p0, p1, self.v, self.outer_edges):
            ev.append((eid[0], "outer", eid[1]))
        for eid in segment_polyline_crossings(p0, p1, self.v, self.inner_edges):
            ev.append((eid[0], "inner", eid[1]))
        for eid in segment_polyline_crossings(p0, p1, self.v, self.trans_edges):
            ev.append((eid[0], "trans", eid[1]))
        for name in ("am", "md", "bm", "mc"):
            a, b = self._chord(name)
            t = _seg_cross_single(p0, p1, a, b)
            if t is not None:
                ev.append((t, "chord", name))
        return sorted(ev)

    def _start_piece(self, x: int, toward: np.ndarray) -> str:
        vx = self.v[x]
        if x == self.a or x == self.d:
            tri = "T1" if x == self.a else "T2"
            if self._in_corner_cone(x, toward, tri):
                return tri
            return "A"
        if x == self.b or x == self.c:
            tri = "T1" if x == self.b else "T2"
            if self._in_corner_cone(x, toward, tri):
                return tri
            return "B"
        return "A" if int(x) in self.outer_set else "B"

    def _in_corner_cone(self, x: int, u: np.ndarray, tri: str) -> bool:
        if tri == "T1":
            corners = [self.v[self.a], self.v[self.b], self.m]
        else:
            corners = [self.v[self.c], self.v[self.d], self.m]
        p = self.v[x]
        others = [q for q in corners if not np.allclose(q, p)]
        e1 = others[0] - p
        e2 = others[1] - p
        det = e1[0] * e2[1] - e1[1] * e2[0]
        l1 = (u[0] * e2[1] - u[1] * e2[0]) / det
        l2 = (e1[0] * u[1] - e1[1] * u[0]) / det
        return l1 > -1e-12 and l2 > -1e-12

    def _arrival_pieces(self, y: int) -> set:
        if y == self.a:
            return {"A", "T1"}
        if y == self.b:
            return {"B", "T1"}
        if y == self.c:
            return {"B", "T2"}
        if y == self.d:
            return {"A", "T2"}
        return {"A"} if int(y) in self.outer_set else {"B"}

    _SWITCH = {
        ("A", "am"): "T1", ("A", "md"): "T2",
        ("T1", "am"): "A", ("T1", "bm"): "B",
        ("T2", "md"): "A", ("T2", "mc"): "B",
        ("B", "bm"): "T1", ("B", "mc"): "T2",
    }

    def _blocks(self, piece: str, kind: str, edge_id: int) -> bool:
        if piece == "A":
            return kind == "outer"
        if piece == "B":
            return kind == "inner"
        if piece == "T1":
            return kind == "trans" and edge_id == self.a
        return kind == "trans" and edge_id == self.c

    def visible(self, x: int, y: int) -> bool:
        if x == y:
            return False
        if y in _surface_neighbors(self.surface, x):
            return True
        p0, p1 = self.v[x], self.v[y]
        if np.linalg.norm(p1 - p0) < EPS_SELF_REL * self.surface.bbox_diameter():
            return False
        if not direction_enters_interior(self.surface, x, p1 - p0):
            return False
        if not direction_enters_interior(self.surface, y, p0 - p1):
            return False
        piece = self._start_piece(x, p1 - p0)
        for t, kind, tag in self._events(p0, p1):
            if kind == "chord":
                nxt = self._SWITCH.get((piece, tag))
                if nxt is not None:
                    piece = nxt
                continue
            # polyline edge: ignore edges incident to x or y themselves
            if tag in ((x - 1) % self.n, x, (y - 1) % self.n, y):
                continue
            if self._blocks(piece, kind, tag):
                return False
        return piece in self._arrival_pieces(y)


# ---------------------------------------------------------------------------
# visibility oracle: embedded surfaces (segment vs mesh)
# ---------------------------------------------------------------------------

def embedded_mesh_visible(surface: DiscreteHypersurface, x: int, y: int) -> bool:
    """y visible from x inside an embedded closed mesh iff the open chord hits
    no face properly before reaching y."""
    if x == y:
        return False
    if y in _surface_neighbors(surface, x):
        return True
    v = surface.vertices
    f = surface.faces
    p0, p1 = v[x], v[y]
    d = p1 - p0
    tri = v[f]
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    # Moeller-Trumbore, vectorized
    pvec = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > 1e-14
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = p0 - tri[:, 0]
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    vv = np.einsum("j,ij->i", d, qvec) * inv
    t = np.einsum("ij,ij->i", e2, qvec) * inv
    # inclusive windows: a chord threading a mesh edge blocks on both faces
    hit = ok & (u > -1e-9) & (vv > -1e-9) & (u + vv < 1 + 1e-9) & \
        (t > 1e-7) & (t < 1 - 1e-7)
    # faces containing x or y only touch at the endpoints
    touch = (f == x).any(axis=1) | (f == y).any(axis=1)
    blocked = hit & ~touch
    if blocked.any():
        return False
    # chord must stay inside: test its midpoint by ray parity along +z-ish
    mid = 0.5 * (p0 + p1)
    return _point_in_mesh(mid, surface)


def _point_in_mesh(p, surface: DiscreteHypersurface) -> bool:
    v = surface.vertices
    f = surface.faces
    d = np.array([0.57735026919, 0.57735026919, 0.57735026919])
    tri = v[f]
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    pvec = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > 1e-14
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = p - tri[:, 0]
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    vv = np.einsum("j,ij->i", d, qvec) * inv
    t = np.einsum("ij,ij->i", e2, qvec) * inv
    hits = ok & (u > 0) & (vv > 0) & (u + vv < 1) & (t > 0)
    return bool(hits.sum() % 2 == 1)


# ---------------------------------------------------------------------------
# inscribed-ball (sphere lemma) oracle
# ---------------------------------------------------------------------------

def sphere_lemma_oracle(surface: DiscreteHypersurface, data: CurvatureData,
                        dc: DomainComplex, x: int, kappa: float,
                        tracer: Tracer | None = None) -> dict:
    """Does the interior ball of curvature kappa tangent at x fit in the
    filling?  Brute force: lift the center by tracing inward, flood the
    complex over the ambient ball (sheet-aware), and report any boundary
    vertex of the flooded region strictly inside the ball.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    tr = tracer or Tracer(dc)
    r = 1.0 / kappa
    x_c = int(dc.surface_to_complex[x])
    res = trace_batch(tr, x_c, -data.normals[x][None, :], np.array([r]))
    if res["kind"][0] != 2:
        # center not reachable: the ball pokes through the boundary
        return {"fits": False, "witness": ("center-ray", int(res["kind"][0])),
                "center": None}
    center = res["exit_point"][0]

    # flood simplices meeting the open ball, starting from the center simplex
    start = _locate_simplex(tr, x_c, -data.normals[x], r)
    shrink = r * (1 - 1e-9)
    seen = {start}
    stack = [start]
    witness = None
    while stack:
        si = stack.pop()
        for k, nb in enumerate(dc.neighbors[si]):
            nb = int(nb)
            if nb < 0:
                fac = np.delete(dc.simplices[si], k)
                for cv in fac:
                    sv = int(dc.boundary_map[cv])
                    if sv < 0 or sv == x:
                        continue
                    if np.linalg.norm(dc.vertices[cv] - center) < shrink:
                        witness = sv
                        return {"fits": False, "witness": witness, "center": center}
                continue
            if nb in seen:
                continue
            if _point_simplex_distance(dc, nb, center) < shrink:
                seen.add(nb)
                stack.append(nb)
    return {"fits": True, "witness": None, "center": center}


def _locate_simplex(tr: Tracer, from_vertex: int, direction: np.ndarray, length: float) -> int:
    """Simplex containing the point reached by tracing from a vertex."""
    res = trace_batch(tr, from_vertex, direction[None, :], np.array([length * (1 - 1e-12)]),
                      record_chains=True)
    chain = res["chains"][0]
    if chain:
        return int(chain[-1])
    s, _ = tr.start_simplices(from_vertex, direction[None, :])
    return int(s[0])


# ---------------------------------------------------------------------------
# exterior-ball oracle (shell region)
# ---------------------------------------------------------------------------

def exterior_ball_oracle(surface: DiscreteHypersurface, data: CurvatureData,
                         shell, x: int) -> float:
    """Largest rho such that the exterior tangent ball at x fits inside the
    shell region: no surface vertex strictly inside, and the ball stays within
    the outer wall.  Returns the curvature bound -1/rho."""
    v = surface.vertices
    nu = data.normals[x]
    w = shell.boundary.vertices
    lo, hi = 0.0, shell.delta * 2.0

    others = np.delete(np.arange(surface.n_vertices), x)

    def fits(rho):
        c = v[x] + rho * nu
        if np.min(np.linalg.norm(v[others] - c, axis=1)) < rho * (1 - 1e-9):
            return False
        # inside the wall: distance from center to the wall must exceed rho
        mu = shell.boundary_curvature.normals
        d = w - c
        dist = np.linalg.norm(d, axis=1)
        if dist.min() < rho * (1 - 1e-9):
            return False
        # center must be on the inner side of the wall
        k = int(np.argmin(dist))
        return float(np.dot(c - w[k], mu[k])) <= 0

    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if fits(mid):
            lo = mid
        else:
            hi = mid
    return -1.0 / lo if lo > 0 else -np.inf
