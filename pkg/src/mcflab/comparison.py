"""The static outer comparison shell: an outward normal offset N0 of the
initial surface, the collar region between them, the barrier margin, and r0.

The shell boundary stays fixed (N_t = N0); offsetting a strictly mean convex
surface by a small enough delta keeps min H^N >= 0, so the static shell
satisfies the barrier inequality <dY/dt, mu> >= -H^N with margin min H^N.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curvature import CurvatureData, compute_curvature
from .domain import DomainComplex, _build_neighbors
from .errors import BarrierViolated, EmbeddingLost, NotMeanConvexShell, OffsetDegenerate
from .mesh import DiscreteHypersurface, validate_surface
from .tracing import Tracer, trace_batch


@dataclass
class ComparisonShell:
    delta: float
    surface0: DiscreteHypersurface          # M at build time
    boundary: DiscreteHypersurface          # N0 = outward offset
    boundary_curvature: CurvatureData       # H^N, mu
    shell_complex: DomainComplex            # the collar region chi-bar
    r0: float
    static: bool = True

    def region_boundary_positions(self) -> np.ndarray:
        """Positions of the region's boundary vertices: the moving surface
        side first (indices 0..N-1), then the outer wall (N..2N-1)."""
        return np.vstack([self.surface0.vertices, self.boundary.vertices])

    def region_visible(self, x: int, y_combined: int, tracer: Tracer | None = None) -> bool:
        """Is combined-boundary vertex y visible from surface vertex x inside
        the shell region?  y_combined < N indexes the surface wall, >= N the
        outer wall."""
        dc = self.shell_complex
        tr = tracer or Tracer(dc)
        n = self.surface0.n_vertices
        x_c = int(dc.surface_to_complex[x])
        y_c = int(y_combined)   # complex ids: 0..N-1 surface copies, N.. outer
        if y_c == x_c:
            return False
        target = dc.vertices[y_c]
        dvec = target - dc.vertices[x_c]
        d = float(np.linalg.norm(dvec))
        # vertices one complex edge away (radial partner, wall neighbors) are
        # visible through that edge
        edges = dc.meta.get("edge_sets")
        if edges is None:
            edges = {}
            d1 = dc.dimension + 1
            for simp in dc.simplices:
                for i in range(d1):
                    for j in range(i + 1, d1):
                        edges.setdefault(int(simp[i]), set()).add(int(simp[j]))
                        edges.setdefault(int(simp[j]), set()).add(int(simp[i]))
            dc.meta["edge_sets"] = edges
        if y_c in edges.get(x_c, set()):
            return True
        res = trace_batch(tr, x_c, dvec[None, :], np.array([d * (1 + 1e-9) + 1e-12]))
        if res["kind"][0] in (0, 1):
            ep = res["exit_point"][0]
            if np.linalg.norm(ep - target) <= 1e-6 * tr.scale:
                si, k = res["exit_facet"][0]
                if y_c in np.delete(dc.simplices[si], k).tolist():
                    return True
        return False


def _offset_fold_check(surface: DiscreteHypersurface, offset: DiscreteHypersurface,
                       delta: float) -> None:
    v = surface.vertices
    w = offset.vertices
    if surface.dimension == 2:
        fn_s, _ = surface.face_normals_areas()
        fn_o, _ = offset.face_normals_areas()
        if np.any(np.einsum("ij,ij->i", fn_s, fn_o) <= 0):
            raise OffsetDegenerate("offset face normals flip (delta beyond exterior reach)")
    else:
        e_s = surface.edge_vectors()
        e_o = offset.edge_vectors()
        if np.any(np.einsum("ij,ij->i", e_s, e_o) <= 0):
            raise OffsetDegenerate("offset edge direction flips (delta beyond exterior reach)")
    # non-local contact: an offset vertex approaching a far part of the surface
    d2 = ((w[:, None, :] - v[None, :, :]) ** 2).sum(axis=2)
    if np.any(np.sqrt(d2.min(axis=1)) < 0.9 * delta):
        raise OffsetDegenerate("offset sheet re-approaches the surface (delta beyond reach)")


def _collar_complex_curve(surface: DiscreteHypersurface, offset: DiscreteHypersurface):
    n = surface.n_vertices
    pts = np.vstack([surface.vertices, offset.vertices])
    tris = []
    for i in range(n):
        j = (i + 1) % n
        # quad (i, j, n+j, n+i) split consistently by the smaller index
        tris.append((i, j, n + i))
        tris.append((j, n + j, n + i))
    return pts, np.array(tris, dtype=np.int64)


def _collar_complex_mesh(surface: DiscreteHypersurface, offset: DiscreteHypersurface):
    n = surface.n_vertices
    pts = np.vstack([surface.vertices, offset.vertices])
    tets = []
    for tri in surface.faces:
        b = sorted(int(t) for t in tri)
        p0, p1, p2 = b
        tets.append((p0, p1, p2, n + p0))
        tets.append((p1, p2, n + p0, n + p1))
        tets.append((p2, n + p0, n + p1, n + p2))
    return pts, np.array(tets, dtype=np.int64)


def build_outer_shell(surface: DiscreteHypersurface, data: CurvatureData,
                      delta: float) -> ComparisonShell:
    """Offset N0 = X + delta nu, collar prisms between the walls, r0.

    Raises OffsetDegenerate if delta exceeds the exterior reach, and
    NotMeanConvexShell if the offset loses mean convexity (shrink delta).
    """
    if float(data.mean.min()) <= 0:
        from .errors import NotMeanConvex
        raise NotMeanConvex("outer shell needs a strictly mean convex surface")
    off_v = surface.vertices + delta * data.normals
    offset = surface.with_vertices(off_v)
    validate_surface(offset)
    _offset_fold_check(surface, offset, delta)
    ncurv = compute_curvature(offset)
    if float(ncurv.mean.min()) < 0:
        raise NotMeanConvexShell(f"offset min H = {ncurv.mean.min():.4g} < 0; shrink delta")

    if surface.dimension == 1:
        pts, simplices = _collar_complex_curve(surface, offset)
        dim = 2
    else:
        pts, simplices = _collar_complex_mesh(surface, offset)
        dim = 3
    # orient positively and build adjacency; boundary = both walls
    dc = DomainComplex(dim, pts, simplices, np.zeros_like(simplices),
                       -np.ones(len(pts), dtype=np.int64), np.zeros(0, dtype=np.int64))
    meas = dc.simplex_measures()
    simplices = simplices.copy()
    flip = meas < 0
    simplices[flip] = simplices[flip][:, [1, 0] + list(range(2, dim + 1))]
    nbr = _build_neighbors(simplices)
    n = surface.n_vertices
    bmap = np.concatenate([np.arange(n), n + np.arange(n)])
    s2c = np.arange(n, dtype=np.int64)
    shell_dc = DomainComplex(dim, pts, simplices, nbr, bmap, s2c,
                             meta={"kind": "shell-collar"})
    if np.any(shell_dc.simplex_measures() <= 0):
        raise OffsetDegenerate("collar prisms degenerate")

    r0 = compute_r0_complex(shell_dc, n)
    return ComparisonShell(delta, surface, offset, ncurv, shell_dc, r0)


def compute_r0_complex(shell_dc: DomainComplex, n_surface: int) -> float:
    """r0 = min pullback distance from the initial boundary to the shell wall.

    For a collar-built shell this equals delta (the radial edges); computed
    honestly by Dijkstra over the complex edges."""
    dist = shell_dc.edge_graph_distances(np.arange(n_surface))
    return float(dist[n_surface:].min())


def compute_r0(shell: ComparisonShell) -> float:
    return compute_r0_complex(shell.shell_complex, shell.surface0.n_vertices)


def barrier_check(shell: ComparisonShell, wall_velocity: np.ndarray | None = None) -> float:
    """Barrier margin min(<dY/dt, mu> + H^N); the static shell has dY/dt = 0.

    Raises BarrierViolated with the offending vertex if the margin is negative.
    """
    hn = shell.boundary_curvature.mean
    if wall_velocity is None:
        vals = hn
    else:
        vals = np.einsum("ij,ij->i", wall_velocity, shell.boundary_curvature.normals) + hn
    k = int(np.argmin(vals))
    if vals[k] < 0:
        raise BarrierViolated(k, float(vals[k]))
    return float(vals[k])


def _min_distance_to_wall(points: np.ndarray, shell: ComparisonShell) -> float:
    w = shell.boundary.vertices
    if shell.boundary.dimension == 1:
        a = w
        b = np.roll(w, -1, axis=0)
        ab = b - a
        denom = np.einsum("ij,ij->i", ab, ab)
        best = np.inf
        for p in points:
            t = np.clip(np.einsum("ij,j->i", ab, p) - np.einsum("ij,ij->i", ab, a), 0, denom)
            t = t / np.maximum(denom, 1e-300)
            proj = a + t[:, None] * ab
            best = min(best, float(np.linalg.norm(proj - p, axis=1).min()))
        return best
    d2 = ((points[:, None, :] - w[None, :, :]) ** 2).sum(axis=2)
    return float(np.sqrt(d2.min()))


def embedding_monitor(shell: ComparisonShell, snapshots) -> list[tuple[float, float]]:
    """Per-snapshot distance from the moving boundary to the shell wall;
    raises EmbeddingLost if a vertex crosses outside the wall."""
    rows = []
    mu = shell.boundary_curvature.normals
    w = shell.boundary.vertices
    for snap in snapshots:
        pts = snap.surface.vertices
        d2 = ((pts[:, None, :] - w[None, :, :]) ** 2).sum(axis=2)
        nearest = np.argmin(d2, axis=1)
        signed = np.einsum("ij,ij->i", pts - w[nearest], mu[nearest])
        if np.any(signed > 0):
            raise EmbeddingLost(f"vertex escaped the shell at t={snap.time:.6g}")
        rows.append((snap.time, _min_distance_to_wall(pts, shell)))
    return rows


def rebuild_region(shell: ComparisonShell, surface_t: DiscreteHypersurface) -> ComparisonShell:
    """Shell region between the flowed surface and the static wall (same
    combinatorics; prism volumes re-checked)."""
    if surface_t.n_vertices != shell.surface0.n_vertices:
        raise ValueError("shell region rebuild needs the original vertex count")
    if surface_t.dimension == 1:
        pts, simplices = _collar_complex_curve(surface_t, shell.boundary)
        dim = 2
    else:
        pts, simplices = _collar_complex_mesh(surface_t, shell.boundary)
        dim = 3
    dc = DomainComplex(dim, pts, simplices, np.zeros_like(simplices),
                       -np.ones(len(pts), dtype=np.int64), np.zeros(0, dtype=np.int64))
    meas = dc.simplex_measures()
    simplices = simplices.copy()
    flip = meas < 0
    simplices[flip] = simplices[flip][:, [1, 0] + list(range(2, dim + 1))]
    nbr = _build_neighbors(simplices)
    n = surface_t.n_vertices
    bmap = np.concatenate([np.arange(n), n + np.arange(n)])
    shell_dc = DomainComplex(dim, pts, simplices, nbr, bmap, np.arange(n, dtype=np.int64),
                             meta={"kind": "shell-collar"})
    if np.any(shell_dc.simplex_measures() <= 0):
        raise EmbeddingLost("shell region degenerated (surface met the wall?)")
    return ComparisonShell(shell.delta, surface_t, shell.boundary,
                           shell.boundary_curvature, shell_dc,
                           compute_r0_complex(shell_dc, n), shell.static)
