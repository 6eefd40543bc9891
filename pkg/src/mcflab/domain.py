"""The immersed filling manifold: a simplicial complex with per-vertex
immersed positions.  The pullback metric is the flat metric each simplex
inherits from its image, so geodesics are straight ambient lines walked
through the abstract facet adjacency (which encodes the sheet structure).

Embedded curves fill by constrained triangulation of the enclosed polygon,
star-shaped solids by coning from the centroid, revolution solids by
structured slabs.  The one-double-point immersed family (limaçon) fills with
two sheets over the inner loop glued around one declared branch vertex: the
total turning of such a curve is 4*pi, so Gauss-Bonnet forces a single cone
vertex of angle 4*pi in any flat filling; it is tagged and exempted from
chart injectivity (the immersion contract holds away from it).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ChartInjectivityFailure, DegenerateGeometry, NotFillable, RecollarNeeded
from .mesh import DiscreteHypersurface
from .curvature import CurvatureData

EPS_VOL_REL = 1e-12


@dataclass
class DomainComplex:
    dimension: int                 # ambient/space dimension (n+1): 2 or 3
    vertices: np.ndarray           # (V, dim) immersed positions of the map G
    simplices: np.ndarray          # (S, dim+1) vertex ids
    neighbors: np.ndarray          # (S, dim+1): simplex across facet opposite local k, -1 = boundary
    boundary_map: np.ndarray       # (V,) surface vertex id or -1
    surface_to_complex: np.ndarray  # (N,)
    branch_vertices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    vertex_tags: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_simplices(self) -> int:
        return len(self.simplices)

    def simplex_measures(self) -> np.ndarray:
        p = self.vertices[self.simplices]
        e = p[:, 1:, :] - p[:, :1, :]
        if self.dimension == 2:
            det = e[:, 0, 0] * e[:, 1, 1] - e[:, 0, 1] * e[:, 1, 0]
            return det / 2.0
        det = np.einsum("sij,sij->s", e[:, 0:1, :], np.cross(e[:, 1, :], e[:, 2, :])[:, None, :])
        return det / 6.0

    def total_measure(self) -> float:
        """Immersed area/volume counted with multiplicity."""
        return float(np.abs(self.simplex_measures()).sum())

    def boundary_facets(self) -> list[tuple[int, int]]:
        """(simplex, local_k) pairs whose opposite facet is on the boundary."""
        s, k = np.nonzero(self.neighbors < 0)
        return list(zip(s.tolist(), k.tolist()))

    def vertex_incidence(self) -> list[list[int]]:
        inc = [[] for _ in range(len(self.vertices))]
        for si, simp in enumerate(self.simplices):
            for v in simp:
                inc[v].append(si)
        return inc

    def edge_graph_distances(self, sources: np.ndarray) -> np.ndarray:
        """Multi-source Dijkstra over complex edges (pullback edge lengths)."""
        import heapq
        nv = len(self.vertices)
        adj: list[list[tuple[int, float]]] = [[] for _ in range(nv)]
        d1 = self.dimension + 1
        seen = set()
        for simp in self.simplices:
            for i in range(d1):
                for j in range(i + 1, d1):
                    a, b = int(simp[i]), int(simp[j])
                    key = (min(a, b), max(a, b))
                    if key in seen:
                        continue
                    seen.add(key)
                    w = float(np.linalg.norm(self.vertices[a] - self.vertices[b]))
                    adj[a].append((b, w))
                    adj[b].append((a, w))
        dist = np.full(nv, np.inf)
        heap = []
        for s in sources:
            dist[s] = 0.0
            heap.append((0.0, int(s)))
        heapq.heapify(heap)
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u] + 1e-15:
                continue
            for v, w in adj[u]:
                nd = d + w
                if nd < dist[v] - 1e-15:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        return dist


def _build_neighbors(simplices: np.ndarray) -> np.ndarray:
    d1 = simplices.shape[1]
    facets: dict[tuple, list[tuple[int, int]]] = {}
    for si, simp in enumerate(simplices):
        for k in range(d1):
            fac = tuple(sorted(np.delete(simp, k)))
            facets.setdefault(fac, []).append((si, k))
    nbr = -np.ones_like(simplices)
    for fac, occ in facets.items():
        if len(occ) > 2:
            raise NotFillable(f"non-manifold facet {fac} shared by {len(occ)} simplices")
        if len(occ) == 2:
            (s0, k0), (s1, k1) = occ
            nbr[s0, k0] = s1
            nbr[s1, k1] = s0
    return nbr


def _finalize(dim, verts, simplices, boundary_map, surface, branch=(), tags=None, meta=None) -> DomainComplex:
    verts = np.asarray(verts, dtype=float)
    simplices = np.asarray(simplices, dtype=np.int64)
    # orient all simplices positively
    dc = DomainComplex(dim, verts, simplices, np.zeros_like(simplices), boundary_map,
                       np.zeros(0, dtype=np.int64))
    meas = dc.simplex_measures()
    flip = meas < 0
    simplices[flip] = simplices[flip][:, [1, 0] + list(range(2, dim + 1))]
    nbr = _build_neighbors(simplices)
    s2c = -np.ones(surface.n_vertices, dtype=np.int64)
    for ci, si in enumerate(boundary_map):
        if si >= 0:
            s2c[si] = ci
    if np.any(s2c < 0):
        raise NotFillable("boundary correspondence incomplete")
    out = DomainComplex(dim, verts, simplices, nbr, boundary_map, s2c,
                        np.asarray(branch, dtype=np.int64),
                        tags if tags is not None else np.zeros(len(verts), dtype=np.int64),
                        meta or {})
    validate_domain(out, surface)
    return out


def validate_domain(dc: DomainComplex, surface: DiscreteHypersurface) -> None:
    meas = dc.simplex_measures()
    scale = dc.total_measure() / max(len(meas), 1)
    if np.any(meas <= EPS_VOL_REL * scale):
        raise DegenerateGeometry("degenerate simplex in domain complex")
    # boundary facets must reproduce the hypersurface connectivity exactly
    bfac = dc.boundary_facets()
    mapped = set()
    for si, k in bfac:
        fac = np.delete(dc.simplices[si], k)
        sids = dc.boundary_map[fac]
        if np.any(sids < 0):
            raise NotFillable("boundary facet with interior vertex")
        mapped.add(tuple(sorted(sids.tolist())))
    if surface.dimension == 1:
        n = surface.n_vertices
        m = n if surface.closed else n - 1
        want = {tuple(sorted((i, (i + 1) % n))) for i in range(m)}
    else:
        want = {tuple(sorted(t.tolist())) for t in surface.faces}
    if mapped != want:
        raise NotFillable("domain boundary does not reproduce the hypersurface connectivity")


# ---------------------------------------------------------------------------
# polygon triangulation (ear clipping, tolerant of reflex vertices)
# ---------------------------------------------------------------------------

def _ear_clip(points: np.ndarray, ids: list[int]) -> list[tuple[int, int, int]]:
    """Triangulate the simple polygon points[ids] (CCW); returns id triples."""
    ids = list(ids)
    pts = {i: points[i] for i in ids}

    def area2(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    def inside(a, b, c, p):
        return (area2(a, b, p) > 0) and (area2(b, c, p) > 0) and (area2(c, a, p) > 0)

    tris = []
    guard = 0
    scale = np.abs(points[ids]).max() + 1.0
    while len(ids) > 3 and guard < 10 * len(points) ** 2:
        guard += 1
        n = len(ids)
        best = None
        for i in range(n):
            ia, ib, ic = ids[(i - 1) % n], ids[i], ids[(i + 1) % n]
            a, b, c = pts[ia], pts[ib], pts[ic]
            ar = area2(a, b, c)
            if ar <= 1e-14 * scale * scale:
                continue
            ok = True
            for j in ids:
                if j in (ia, ib, ic):
                    continue
                if inside(a, b, c, pts[j]):
                    ok = False
                    break
            if ok:
                best = (i, ia, ib, ic, ar)
                break
        if best is None:
            raise NotFillable("ear clipping failed (polygon not simple?)")
        i, ia, ib, ic, _ = best
        tris.append((ia, ib, ic))
        ids.pop(i)
    if len(ids) == 3:
        tris.append(tuple(ids))
    return tris


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def _winding_number(p: np.ndarray, verts: np.ndarray) -> int:
    d = verts - p
    ang = np.arctan2(d[:, 1], d[:, 0])
    dd = np.diff(np.concatenate([ang, ang[:1]]))
    dd = (dd + np.pi) % (2 * np.pi) - np.pi
    return int(round(dd.sum() / (2 * np.pi)))


def _interior_lattice(vertices: np.ndarray, spacing: float) -> np.ndarray:
    """Hex lattice points strictly inside the polygon, away from the boundary."""
    lo = vertices.min(axis=0)
    hi = vertices.max(axis=0)
    xs = np.arange(lo[0] + spacing / 2, hi[0], spacing)
    pts = []
    row = 0
    y = lo[1] + spacing / 2
    while y < hi[1]:
        off = (spacing / 2) if (row % 2) else 0.0
        for x in xs:
            pts.append((x + off, y))
        y += spacing * np.sqrt(3) / 2
        row += 1
    if not pts:
        return np.zeros((0, 2))
    pts = np.array(pts)
    ins = np.array([_winding_number(p, vertices) != 0 for p in pts])
    pts = pts[ins]
    # keep a clear margin from the boundary
    d2 = ((pts[:, None, :] - vertices[None, :, :]) ** 2).sum(axis=2).min(axis=1)
    return pts[d2 > (0.7 * spacing) ** 2]


def _tri_area2(pts, t):
    a, b, c = pts[t[0]], pts[t[1]], pts[t[2]]
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _in_circumcircle(pts, t, p):
    ax, ay = pts[t[0]]
    bx, by = pts[t[1]]
    cx, cy = pts[t[2]]
    dx, dy = p
    m = np.array([
        [ax - dx, ay - dy, (ax - dx) ** 2 + (ay - dy) ** 2],
        [bx - dx, by - dy, (bx - dx) ** 2 + (by - dy) ** 2],
        [cx - dx, cy - dy, (cx - dx) ** 2 + (cy - dy) ** 2],
    ])
    return np.linalg.det(m) > 1e-14


def _triangulate_with_interior(verts: np.ndarray, interior: np.ndarray):
    """Ear-clip the polygon, insert interior points by 1->3 splits, then
    Lawson-flip interior edges toward Delaunay.  The boundary edges are never
    flipped, so the polygon boundary is reproduced exactly."""
    n = len(verts)
    pts = np.vstack([verts, interior]) if len(interior) else verts
    tris = [list(t) for t in _ear_clip(verts, list(range(n)))]
    for pid in range(n, len(pts)):
        p = pts[pid]
        host = None
        for ti, t in enumerate(tris):
            a, b, c = pts[t[0]], pts[t[1]], pts[t[2]]
            d0 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
            d1 = (c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0])
            d2 = (a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0])
            if d0 > 0 and d1 > 0 and d2 > 0:
                host = ti
                break
        if host is None:
            continue  # too close to the boundary; skip the point
        a, b, c = tris[host]
        tris[host] = [a, b, pid]
        tris.append([b, c, pid])
        tris.append([c, a, pid])
    # Lawson flips on interior edges (one sweep per pass; stale entries are
    # skipped via the touched set)
    for _ in range(80):
        edge_map = {}
        for ti, t in enumerate(tris):
            for k in range(3):
                e = (min(t[k], t[(k + 1) % 3]), max(t[k], t[(k + 1) % 3]))
                edge_map.setdefault(e, []).append((ti, k))
        flips = 0
        touched = set()
        for (u, w), occ in edge_map.items():
            if len(occ) != 2:
                continue
            if w < n and u < n and abs(u - w) in (1, n - 1):
                continue  # boundary edge
            (t1, k1), (t2, k2) = occ
            if t1 in touched or t2 in touched:
                continue
            a = tris[t1][(k1 + 2) % 3]
            b = tris[t2][(k2 + 2) % 3]
            if not _in_circumcircle(pts, tris[t1], pts[b]):
                continue
            new1 = [a, tris[t1][k1], b]
            new2 = [b, tris[t2][k2], a]
            if _tri_area2(pts, new1) <= 0 or _tri_area2(pts, new2) <= 0:
                continue
            tris[t1] = new1
            tris[t2] = new2
            touched.update((t1, t2))
            flips += 1
        if flips == 0:
            break
    return pts, np.array(tris, dtype=np.int64)


def build_embedded_curve_domain(surface: DiscreteHypersurface, convex: bool,
                                interior_spacing: float | None = None) -> DomainComplex:
    v = surface.vertices
    if surface.orientation * surface.enclosed_area() <= 0:
        raise NotFillable("curve does not positively enclose a region")
    if self_crossings(surface):
        raise NotFillable("self-intersecting curve needs scenario sheet structure")
    if interior_spacing is None:
        interior_spacing = 3.0 * float(surface.edge_lengths().mean())
    inner = _interior_lattice(v, interior_spacing)
    pts, simplices = _triangulate_with_interior(v, inner)
    bmap = -np.ones(len(pts), dtype=np.int64)
    bmap[:len(v)] = np.arange(len(v))
    return _finalize(2, pts, simplices, bmap, surface, meta={"kind": "embedded-curve"})


def build_star_domain(surface: DiscreteHypersurface) -> DomainComplex:
    """Cone from the centroid; valid for star-shaped solids (validated)."""
    v = surface.vertices
    center = v.mean(axis=0)
    pts = np.vstack([v, center[None, :]])
    c = len(v)
    tets = np.column_stack([surface.faces, np.full(len(surface.faces), c)])
    bmap = -np.ones(len(pts), dtype=np.int64)
    bmap[:len(v)] = np.arange(len(v))
    try:
        return _finalize(3, pts, tets, bmap, surface, meta={"kind": "star-shaped"})
    except DegenerateGeometry as exc:
        raise NotFillable("surface is not star-shaped from its centroid") from exc


def build_revolution_domain(surface: DiscreteHypersurface, profile_x: np.ndarray,
                            profile_rho: np.ndarray, n_phi: int) -> DomainComplex:
    """Structured tet mesh of an axially monotone solid of revolution.

    Mirrors the vertex layout of scenarios.revolve_profile so boundary faces
    coincide with the surface triangles exactly.
    """
    n_rings = len(profile_x) - 2
    nv_surf = surface.n_vertices
    assert nv_surf == 2 + n_rings * n_phi
    pole0 = 0
    pole1 = nv_surf - 1
    ring = lambda i: 1 + i * n_phi + np.arange(n_phi)      # surface ring i (0-based interior station)

    pts = [surface.vertices]
    axis_ids = []
    nv = nv_surf
    for i in range(n_rings):
        pts.append(np.array([[profile_x[i + 1], 0.0, 0.0]]))
        axis_ids.append(nv)
        nv += 1
    pts = np.vstack(pts)

    tets = []
    r0 = ring(0)
    for j in range(n_phi):
        jn = (j + 1) % n_phi
        tets.append([pole0, r0[j], r0[jn], axis_ids[0]])
    for i in range(n_rings - 1):
        ra, rb = ring(i), ring(i + 1)
        ai, an = axis_ids[i], axis_ids[i + 1]
        for j in range(n_phi):
            jn = (j + 1) % n_phi
            tets.append([ra[j], rb[j], rb[jn], ai])
            tets.append([ra[j], rb[jn], ra[jn], ai])
            tets.append([rb[j], rb[jn], an, ai])
    rl = ring(n_rings - 1)
    for j in range(n_phi):
        jn = (j + 1) % n_phi
        tets.append([pole1, rl[jn], rl[j], axis_ids[-1]])
    bmap = -np.ones(len(pts), dtype=np.int64)
    bmap[:nv_surf] = np.arange(nv_surf)
    return _finalize(3, pts, np.array(tets, dtype=np.int64), bmap, surface,
                     meta={"kind": "revolution"})


# -- one-double-point immersed curves ---------------------------------------

def self_crossings(surface: DiscreteHypersurface) -> list:
    """All transversal edge-pair crossings of a closed polyline, as
    (edge1, edge2, point) with edges named by their start vertex."""
    v = surface.vertices
    n = len(v)
    e0 = v
    e1 = np.roll(v, -1, axis=0)
    hits = []
    for i in range(n):
        a, b = e0[i], e1[i]
        js = np.arange(i + 2, n if i > 0 else n - 1)
        d = b - a
        c0, c1 = e0[js], e1[js]
        dd = c1 - c0
        denom = d[0] * dd[:, 1] - d[1] * dd[:, 0]
        ok = np.abs(denom) > 1e-300
        r = c0 - a
        t = np.where(ok, (r[:, 0] * dd[:, 1] - r[:, 1] * dd[:, 0]) / np.where(ok, denom, 1.0), -1)
        s = np.where(ok, (r[:, 0] * d[1] - r[:, 1] * d[0]) / np.where(ok, denom, 1.0), -1)
        sel = (t > 1e-12) & (t < 1 - 1e-12) & (s > 1e-12) & (s < 1 - 1e-12)
        for j, tt in zip(js[sel], t[sel]):
            hits.append((i, int(j), a + tt * d))
    return hits


def find_self_crossing(surface: DiscreteHypersurface):
    """The unique transversal self-crossing of a one-double-point polyline."""
    hits = self_crossings(surface)
    if len(hits) != 1:
        raise NotFillable(f"expected exactly one self-crossing, found {len(hits)}")
    return hits[0]


def one_double_point_structure(surface: DiscreteHypersurface):
    """Crossing bookkeeping shared by the builder and the brute-force oracle.

    Returns dict with vertex labels a, b, c, d (edge (a,b) and (c,d) cross),
    the crossing point, the branch anchor m_pos, and the index arrays of the
    outer and inner arcs (outer contains d..a, inner contains b..c).
    """
    i, j, cross = find_self_crossing(surface)
    n = surface.n_vertices
    a, b = i, (i + 1) % n
    c, d = j, (j + 1) % n
    inner = [b]
    k = b
    while k != c:
        k = (k + 1) % n
        inner.append(k)
    outer = [d]
    k = d
    while k != a:
        k = (k + 1) % n
        outer.append(k)
    # the shorter loop is the inner one; swap if needed
    v = surface.vertices
    def loop_len(idx):
        p = v[idx]
        return np.linalg.norm(np.diff(p, axis=0), axis=1).sum()
    if loop_len(outer) < loop_len(inner):
        a, b, c, d = c, d, a, b
        inner, outer = outer, inner
    w1 = v[b] - cross
    w2 = v[c] - cross
    bis = w1 / np.linalg.norm(w1) + w2 / np.linalg.norm(w2)
    bis /= np.linalg.norm(bis)
    t_m = 4.0 * max(np.linalg.norm(w1), np.linalg.norm(w2))
    m_pos = cross + t_m * bis
    return {"a": a, "b": b, "c": c, "d": d, "cross": cross, "m_pos": m_pos,
            "outer": np.array(outer), "inner": np.array(inner)}


def build_one_double_point_domain(surface: DiscreteHypersurface) -> DomainComplex:
    """Two-sheet branched filling of a curve with one transversal double point.

    Sheet A fills the outer loop (covering the inner region once more), sheet
    B fills the inner loop; they are glued across the chords (b,m) and (m,c)
    around the branch vertex m, and the two crossing edges live on wedge
    triangles (a,b,m) and (c,d,m).
    """
    st = one_double_point_structure(surface)
    v = surface.vertices
    n = len(v)
    m_id = n
    pts = np.vstack([v, st["m_pos"][None, :]])
    a, b, c, d = st["a"], st["b"], st["c"], st["d"]

    tris = [(a, b, m_id), (c, d, m_id)]
    # outer polygon: d .. a then m
    tris += _ear_clip(pts, list(st["outer"]) + [m_id])
    # inner polygon: b .. c then m
    tris += _ear_clip(pts, list(st["inner"]) + [m_id])

    bmap = -np.ones(len(pts), dtype=np.int64)
    bmap[:n] = np.arange(n)
    tags = np.zeros(len(pts), dtype=np.int64)
    tags[st["inner"]] = 1
    tags[m_id] = 2
    return _finalize(2, pts, np.array(tris, dtype=np.int64), bmap, surface,
                     branch=[m_id], tags=tags,
                     meta={"kind": "one-double-point-curve", "structure": st})


def build_limacon_parameter_domain(surface: DiscreteHypersurface, a: float, b: float,
                                   theta: np.ndarray, interior_spacing: float = 0.05) -> DomainComplex:
    """Two-sheet filling of the analytic limaçon via its quadratic chart.

    The curve (a + b cos t) e^{it} is the boundary image of the unit
    parameter disk under w(z) = b/2 + a z + (b/2) z^2, whose single critical
    point z0 = -a/b is the branch vertex: this spreads the sheet gluing
    around the deep branch point instead of a slit, which is the structure
    the canonical-chart separation test probes.
    """
    from scipy.spatial import Delaunay
    if not a < b:
        raise NotFillable("parameter chart needs an inner loop (a < b)")
    z_bd = np.exp(1j * theta)
    z0 = -a / b
    lo = -1.0 + interior_spacing / 2
    pts = []
    row = 0
    y = lo
    while y < 1.0:
        off = (interior_spacing / 2) if (row % 2) else 0.0
        x = lo + off
        while x < 1.0:
            if x * x + y * y < (1 - 0.8 * interior_spacing) ** 2 \
                    and abs(complex(x, y) - z0) > 0.6 * interior_spacing:
                pts.append((x, y))
            x += interior_spacing
        y += interior_spacing * np.sqrt(3) / 2
        row += 1
    param = np.concatenate([np.stack([z_bd.real, z_bd.imag], axis=1),
                            np.array([[z0, 0.0]]),
                            np.array(pts) if pts else np.zeros((0, 2))])
    tri = Delaunay(param)
    z = param[:, 0] + 1j * param[:, 1]
    w = b / 2 + a * z + (b / 2) * z * z
    verts = np.stack([w.real, w.imag], axis=1)
    n = surface.n_vertices
    verts[:n] = surface.vertices  # identical by the chart identity; keep exact
    bmap = -np.ones(len(verts), dtype=np.int64)
    bmap[:n] = np.arange(n)
    tags = np.zeros(len(verts), dtype=np.int64)
    tags[n] = 2
    return _finalize(2, verts, tri.simplices.astype(np.int64), bmap, surface,
                     branch=[n], tags=tags,
                     meta={"kind": "limacon-parameter", "branch_image": (float(w[n].real), 0.0)})


def build_domain(surface: DiscreteHypersurface, hints: dict | None = None) -> DomainComplex:
    """Construct the immersed filling for a surface, per scenario hints."""
    hints = hints or {}
    kind = hints.get("kind")
    if kind is None:
        kind = "embedded-curve" if surface.dimension == 1 else "star-shaped"
    if kind == "embedded-curve":
        try:
            return build_embedded_curve_domain(surface, hints.get("convex", False),
                                               hints.get("interior_spacing"))
        except NotFillable:
            raise
    if kind == "one-double-point-curve":
        return build_one_double_point_domain(surface)
    if kind == "star-shaped":
        return build_star_domain(surface)
    if kind == "revolution":
        return build_revolution_domain(surface, np.asarray(hints["profile_x"]),
                                       np.asarray(hints["profile_rho"]), int(hints["n_phi"]))
    raise NotFillable(f"no builder for domain kind {kind!r}")


# ---------------------------------------------------------------------------
# canonical charts
# ---------------------------------------------------------------------------

@dataclass
class ChartAtlas:
    radius: float
    charts: list  # (center vertex, np.ndarray of simplex ids)
    skipped_branch_centers: list


def canonical_charts(dc: DomainComplex, c_a0: float, radius_cap: float = np.inf,
                     check: bool = True) -> ChartAtlas:
    """Vertex-ball atlas of radius min(0.09/sqrt(C_A0), cap).

    The paper-level radius rule r < (10 C_A0)^{-1} mixes units; the
    dimensionally consistent reading r ~ C_A0^{-1/2} is used.  Charts centered
    at declared branch vertices are skipped (G is not an immersion there) and
    simplex pairs sharing a branch vertex are exempt from the overlap test;
    everything else must embed injectively.
    """
    if c_a0 <= 0:
        raise ValueError("need C_A0 > 0")
    r = min(0.09 / np.sqrt(c_a0), radius_cap)
    inc = dc.vertex_incidence()
    branch = set(dc.branch_vertices.tolist())
    # injectivity is waived on the declared singular locus: within one chart
    # diameter of a branch vertex the two sheets are unavoidably closer than
    # the chart radius, so the immersion contract cannot hold there
    branch_zone = set(branch)
    if branch:
        zone_dist = dc.edge_graph_distances(np.array(sorted(branch), dtype=np.int64))
        branch_zone = set(np.nonzero(zone_dist <= 2 * r)[0].tolist())
    charts = []
    covered = np.zeros(dc.n_simplices, dtype=bool)
    for v in range(len(dc.vertices)):
        if v in branch:
            continue
        simp_ids = _ball_subcomplex(dc, v, r, inc)
        charts.append((v, simp_ids))
        covered[simp_ids] = True
    if not covered.all() and check:
        missing = np.nonzero(~covered)[0]
        # branch-star simplices may be uncovered only if every vertex is branch
        for si in missing:
            if not any(int(x) in branch for x in dc.simplices[si]):
                raise ChartInjectivityFailure(f"simplex {si} not covered by any chart")
    atlas = ChartAtlas(r, charts, sorted(branch))
    if check:
        bad = _global_injectivity_check(dc, r, branch_zone)
        if bad is not None:
            raise ChartInjectivityFailure(
                f"simplices {bad} overlap in ambient space within one chart radius")
    return atlas


def _global_injectivity_check(dc: DomainComplex, r: float, branch_zone: set):
    """Equivalent of checking every chart: any two simplices within pullback
    distance 2r of each other must not overlap improperly in ambient space.
    Candidate pairs come from a uniform grid over ambient bounding boxes;
    pullback proximity of disjoint pairs is decided by a Dijkstra capped at
    2r.  Pairs inside the declared branch zone are exempt.
    """
    if dc.dimension != 2:
        return None
    tris = dc.vertices[dc.simplices]
    lo = tris.min(axis=1)
    hi = tris.max(axis=1)
    diam = float((hi - lo).max())
    cell = max(diam, 1e-12)
    keys = {}
    for si in range(len(tris)):
        i0, j0 = int(lo[si, 0] // cell), int(lo[si, 1] // cell)
        i1, j1 = int(hi[si, 0] // cell), int(hi[si, 1] // cell)
        for ii in range(i0, i1 + 1):
            for jj in range(j0, j1 + 1):
                keys.setdefault((ii, jj), []).append(si)
    pairs = set()
    for bucket in keys.values():
        for u in range(len(bucket)):
            for w in range(u + 1, len(bucket)):
                pairs.add((bucket[u], bucket[w]))
    scale = float(np.abs(tris).max()) + 1e-12
    adj = None
    for i, j in sorted(pairs):
        if np.any(lo[i] > hi[j]) or np.any(lo[j] > hi[i]):
            continue
        si, sj = dc.simplices[i], dc.simplices[j]
        set_i, set_j = set(si.tolist()), set(sj.tolist())
        if (set_i & branch_zone) and (set_j & branch_zone):
            continue
        shared = set_i & set_j
        if len(shared) == 2:
            ul, wl = sorted(shared)
            u, w = dc.vertices[ul], dc.vertices[wl]
            e = w - u
            p1 = dc.vertices[[v for v in set_i if v not in shared][0]]
            p2 = dc.vertices[[v for v in set_j if v not in shared][0]]
            c1 = e[0] * (p1[1] - u[1]) - e[1] * (p1[0] - u[0])
            c2 = e[0] * (p2[1] - u[1]) - e[1] * (p2[0] - u[0])
            if c1 * c2 > 1e-18 * scale ** 4:
                return (i, j)
        elif len(shared) == 1:
            vid = shared.pop()
            vpos = dc.vertices[vid]
            o1 = dc.vertices[[v for v in set_i if v != vid]]
            o2 = dc.vertices[[v for v in set_j if v != vid]]
            s1 = (np.arctan2(o1[0, 1] - vpos[1], o1[0, 0] - vpos[0]),
                  np.arctan2(o1[1, 1] - vpos[1], o1[1, 0] - vpos[0]))
            s2 = (np.arctan2(o2[0, 1] - vpos[1], o2[0, 0] - vpos[0]),
                  np.arctan2(o2[1, 1] - vpos[1], o2[1, 0] - vpos[0]))
            if _sectors_overlap(s1, s2, eps=1e-9):
                return (i, j)
        else:
            if not _triangles_overlap_2d(tris[i], tris[j], 0):
                continue
            if adj is None:
                adj = _vertex_edge_adjacency(dc)
            if _pullback_within(dc, adj, set_i, set_j, 2 * r):
                return (i, j)
    return None


def _vertex_edge_adjacency(dc: DomainComplex):
    adj = {}
    d1 = dc.dimension + 1
    for simp in dc.simplices:
        for i in range(d1):
            for j in range(i + 1, d1):
                a, b = int(simp[i]), int(simp[j])
                w = float(np.linalg.norm(dc.vertices[a] - dc.vertices[b]))
                adj.setdefault(a, []).append((b, w))
                adj.setdefault(b, []).append((a, w))
    return adj


def _pullback_within(dc: DomainComplex, adj, seeds: set, targets: set, cap: float) -> bool:
    """Is any target vertex within edge-graph pullback distance cap of seeds?"""
    import heapq
    dist = {s: 0.0 for s in seeds}
    heap = [(0.0, s) for s in seeds]
    heapq.heapify(heap)
    while heap:
        d, u = heapq.heappop(heap)
        if u in targets:
            return True
        if d > dist.get(u, np.inf) + 1e-15 or d > cap:
            continue
        for v, w in adj.get(u, ()):
            nd = d + w
            if nd <= cap and nd < dist.get(v, np.inf) - 1e-15:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return False


def chart_at(dc: DomainComplex, center: int, r: float) -> np.ndarray:
    """The single vertex-ball chart at a chosen center and radius."""
    return _ball_subcomplex(dc, center, r, dc.vertex_incidence())


def _ball_subcomplex(dc: DomainComplex, center: int, r: float, inc) -> np.ndarray:
    """Simplices within pullback edge-graph distance r of the center vertex."""
    import heapq
    verts = dc.vertices
    dist = {center: 0.0}
    heap = [(0.0, center)]
    out = set(inc[center])
    while heap:
        dd, u = heapq.heappop(heap)
        if dd > dist.get(u, np.inf) + 1e-15 or dd > r:
            continue
        for si in inc[u]:
            for w in dc.simplices[si]:
                w = int(w)
                nd = dd + float(np.linalg.norm(verts[w] - verts[u]))
                if nd < dist.get(w, np.inf) - 1e-15 and nd <= r:
                    dist[w] = nd
                    heapq.heappush(heap, (nd, w))
                    out.update(inc[w])
    # the ball subcomplex proper: simplices entirely inside, plus the center's
    # star (which also guarantees the atlas covers every simplex)
    keep = [si for si in out
            if all(dist.get(int(x), np.inf) <= r for x in dc.simplices[si])
            or center in dc.simplices[si]]
    return np.array(sorted(keep), dtype=np.int64)


def chart_probe_components(dc: DomainComplex, simp_ids: np.ndarray, probe_center: np.ndarray,
                           probe_radius: float) -> int:
    """Number of connected components of the chart subcomplex meeting an
    ambient probe ball; >1 flags two sheets over the same ambient region."""
    sel = [si for si in simp_ids
           if _point_simplex_distance(dc, int(si), probe_center) < probe_radius]
    if not sel:
        return 0
    sel_set = set(sel)
    comps = 0
    seen = set()
    for s in sel:
        if s in seen:
            continue
        comps += 1
        stack = [s]
        seen.add(s)
        while stack:
            cur = stack.pop()
            for nb in dc.neighbors[cur]:
                nb = int(nb)
                if nb >= 0 and nb in sel_set and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
    return comps


def _point_simplex_distance(dc: DomainComplex, si: int, p: np.ndarray) -> float:
    q = dc.vertices[dc.simplices[si]]
    if dc.dimension == 2:
        return _point_triangle_dist_2d(p, q)
    return _point_tet_dist(p, q)


def _point_triangle_dist_2d(p, tri):
    def seg(p, a, b):
        ab = b - a
        t = np.clip(np.dot(p - a, ab) / max(np.dot(ab, ab), 1e-300), 0, 1)
        return np.linalg.norm(p - (a + t * ab))
    s = 0.0
    inside = True
    for k in range(3):
        a, b = tri[k], tri[(k + 1) % 3]
        cr = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
        if cr < 0:
            inside = False
    if inside:
        return 0.0
    return min(seg(p, tri[k], tri[(k + 1) % 3]) for k in range(3))


def _point_tet_dist(p, tet):
    # inside test via signed volumes
    def vol(a, b, c, d):
        return np.dot(np.cross(b - a, c - a), d - a)
    v0 = vol(tet[0], tet[1], tet[2], tet[3])
    inside = True
    for k in range(4):
        t = tet.copy()
        t[k] = p
        if vol(t[0], t[1], t[2], t[3]) * v0 < 0:
            inside = False
            break
    if inside:
        return 0.0
    best = np.inf
    faces = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
    for f in faces:
        best = min(best, _point_triangle_dist_3d(p, tet[list(f)]))
    return best


def _point_triangle_dist_3d(p, tri):
    a, b, c = tri
    n = np.cross(b - a, c - a)
    nn = np.dot(n, n)
    if nn < 1e-300:
        return min(np.linalg.norm(p - a), np.linalg.norm(p - b), np.linalg.norm(p - c))
    # project
    t = np.dot(p - a, n) / nn
    proj = p - t * n
    # barycentric test
    def same_side(p1, p2, aa, bb):
        return np.dot(np.cross(bb - aa, p1 - aa), np.cross(bb - aa, p2 - aa)) >= 0
    if same_side(proj, c, a, b) and same_side(proj, a, b, c) and same_side(proj, b, c, a):
        return abs(t) * np.sqrt(nn)
    def seg(p, a, b):
        ab = b - a
        tt = np.clip(np.dot(p - a, ab) / max(np.dot(ab, ab), 1e-300), 0, 1)
        return np.linalg.norm(p - (a + tt * ab))
    return min(seg(p, a, b), seg(p, b, c), seg(p, c, a))


def _sectors_overlap(a, b, eps=1e-12):
    """Do two angular sectors (each of width < pi) overlap with positive measure?"""
    def norm(lo, hi):
        w = (hi - lo) % (2 * np.pi)
        return lo % (2 * np.pi), w
    l1, w1 = norm(*(a if ((a[1] - a[0]) % (2 * np.pi)) < np.pi else (a[1], a[0])))
    l2, w2 = norm(*(b if ((b[1] - b[0]) % (2 * np.pi)) < np.pi else (b[1], b[0])))
    d = (l2 - l1) % (2 * np.pi)
    return (d < w1 - eps) or (((l1 - l2) % (2 * np.pi)) < w2 - eps)


def _chart_overlap(dc: DomainComplex, simp_ids: np.ndarray, branch: set):
    """Return a pair of chart simplices with interior ambient overlap, or None.

    Simplices sharing a facet must lie on opposite sides of it; simplices
    sharing one vertex must occupy disjoint angular sectors there; disjoint
    simplices are tested by separating axes after a bounding-box prefilter.
    Pairs sharing a declared branch vertex are exempt.
    """
    if dc.dimension != 2:
        # 3-d scenarios are embedded; overlap impossible by construction
        return None
    sids = [int(s) for s in simp_ids]
    if not sids:
        return None
    tris = dc.vertices[dc.simplices[sids]]
    lo = tris.min(axis=1)
    hi = tris.max(axis=1)
    cand_i, cand_j = np.nonzero(
        (lo[:, None, 0] <= hi[None, :, 0]) & (lo[None, :, 0] <= hi[:, None, 0]) &
        (lo[:, None, 1] <= hi[None, :, 1]) & (lo[None, :, 1] <= hi[:, None, 1]))
    sel = cand_i < cand_j
    scale = float(np.abs(tris).max()) + 1e-12
    for i, j in zip(cand_i[sel], cand_j[sel]):
        si, sj = dc.simplices[sids[i]], dc.simplices[sids[j]]
        shared = set(si.tolist()) & set(sj.tolist())
        if (set(si.tolist()) & branch) and (set(sj.tolist()) & branch):
            continue  # both inside the declared singular zone
        if len(shared) == 2:
            ul, wl = sorted(shared)
            u, w = dc.vertices[ul], dc.vertices[wl]
            e = w - u
            p1 = dc.vertices[[v for v in si.tolist() if v not in shared][0]]
            p2 = dc.vertices[[v for v in sj.tolist() if v not in shared][0]]
            c1 = e[0] * (p1[1] - u[1]) - e[1] * (p1[0] - u[0])
            c2 = e[0] * (p2[1] - u[1]) - e[1] * (p2[0] - u[0])
            if c1 * c2 > 1e-18 * scale ** 4:
                return (sids[i], sids[j])
        elif len(shared) == 1:
            vid = shared.pop()
            vpos = dc.vertices[vid]
            o1 = dc.vertices[[v for v in si.tolist() if v != vid]]
            o2 = dc.vertices[[v for v in sj.tolist() if v != vid]]
            s1 = (np.arctan2(o1[0, 1] - vpos[1], o1[0, 0] - vpos[0]),
                  np.arctan2(o1[1, 1] - vpos[1], o1[1, 0] - vpos[0]))
            s2 = (np.arctan2(o2[0, 1] - vpos[1], o2[0, 0] - vpos[0]),
                  np.arctan2(o2[1, 1] - vpos[1], o2[1, 0] - vpos[0]))
            if _sectors_overlap(s1, s2, eps=1e-9):
                return (sids[i], sids[j])
        else:
            if _triangles_overlap_2d(tris[i], tris[j], 0):
                return (sids[i], sids[j])
    return None


def _triangles_overlap_2d(t1, t2, n_shared_abstract: int) -> bool:
    """Positive-area intersection test via separating axes with tolerance."""
    scale = max(np.abs(t1).max(), np.abs(t2).max(), 1e-9)
    eps = 1e-9 * scale
    for tri_a, tri_b in ((t1, t2), (t2, t1)):
        for k in range(3):
            a, b = tri_a[k], tri_a[(k + 1) % 3]
            nrm = np.array([-(b[1] - a[1]), b[0] - a[0]])
            ln = np.linalg.norm(nrm)
            if ln < 1e-300:
                continue
            nrm /= ln
            da = np.dot(tri_a - a, nrm)
            db = np.dot(tri_b - a, nrm)
            if db.min() >= da.max() - eps or db.max() <= da.min() + eps:
                return False
    return True


# ---------------------------------------------------------------------------
# collar update of the immersion along the flow
# ---------------------------------------------------------------------------

def _smoothstep_down(s: np.ndarray) -> np.ndarray:
    s = np.clip(s, 0.0, 1.0)
    return 1.0 - (3 * s * s - 2 * s ** 3)


def update_domain_immersion(dc: DomainComplex, old_surface: DiscreteHypersurface,
                            old_curvature: CurvatureData,
                            new_surface: DiscreteHypersurface, curvature: CurvatureData,
                            delta: float, sigma_min_accept: float = 1.0 / 6.0) -> DomainComplex:
    """Move the boundary onto the new surface and carry a collar of depth
    delta along: each collar vertex moves by the cutoff-weighted displacement
    of the normal-offset chart X(Pi) - rho nu(Pi) between the two times, so a
    zero step leaves the complex bit-identical.  Raises RecollarNeeded if the
    depth exceeds the tubular range 1/(2 sqrt(C_A0)) (the chart would fold) or
    if any simplex's relative update map drops below the acceptance singular
    value.
    """
    c_a0 = max(curvature.c_a0, old_curvature.c_a0)
    if delta >= 0.5 / np.sqrt(max(c_a0, 1e-300)):
        raise RecollarNeeded("collar depth beyond the tubular range (chart would fold)")
    verts = dc.vertices.copy()
    is_bdy = dc.boundary_map >= 0
    sources = np.nonzero(is_bdy)[0]
    rho = dc.edge_graph_distances(sources)
    collar = (~is_bdy) & (rho < delta)
    b_pos_old = old_surface.vertices[dc.boundary_map[sources]]

    new_pos_bdy = new_surface.vertices[dc.boundary_map[sources]]
    verts[sources] = new_pos_bdy

    if np.any(collar):
        cid = np.nonzero(collar)[0]
        # project each collar vertex to its closest boundary vertex
        d2 = ((dc.vertices[cid][:, None, :] - b_pos_old[None, :, :]) ** 2).sum(axis=2)
        nearest = np.argmin(d2, axis=1)
        pi_surface = dc.boundary_map[sources[nearest]]
        chi = _smoothstep_down((rho[cid] - delta / 2) / (delta / 2))
        chart_new = (new_surface.vertices[pi_surface]
                     - rho[cid, None] * curvature.normals[pi_surface])
        chart_old = (old_surface.vertices[pi_surface]
                     - rho[cid, None] * old_curvature.normals[pi_surface])
        verts[cid] = dc.vertices[cid] + chi[:, None] * (chart_new - chart_old)

    # relative update map per simplex: smallest singular value >= threshold
    old_p = dc.vertices[dc.simplices]
    new_p = verts[dc.simplices]
    e_old = old_p[:, 1:, :] - old_p[:, :1, :]
    e_new = new_p[:, 1:, :] - new_p[:, :1, :]
    try:
        # rows are edges, so this solves for the transpose of the update map;
        # singular values and determinant sign are unaffected
        M = np.linalg.solve(e_old, e_new)
    except np.linalg.LinAlgError as exc:
        raise RecollarNeeded("old simplex degenerate") from exc
    sv = np.linalg.svd(M, compute_uv=False)
    det = np.linalg.det(M)
    if np.any(sv[:, -1] < sigma_min_accept) or np.any(det <= 0):
        raise RecollarNeeded("collar update degenerates the metric")
    out = DomainComplex(dc.dimension, verts, dc.simplices, dc.neighbors, dc.boundary_map,
                        dc.surface_to_complex, dc.branch_vertices, dc.vertex_tags,
                        dict(dc.meta))
    validate_domain(out, new_surface)
    return out
