"""Discrete hypersurfaces: closed polylines in the plane (n=1) and closed
oriented triangle meshes in 3-space (n=2).

Vertices are stored as an (N, n+1) float array.  For curves the connectivity
is the cyclic vertex order; for meshes it is an (F, 3) index array whose
winding, seen from outside, is counterclockwise when ``orientation=+1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateGeometry

EPS_GEOM_REL = 1e-9  # minimum edge length, relative to bounding-box diameter


@dataclass(frozen=True)
class DiscreteHypersurface:
    """The flowing boundary M_t.

    dimension    : 1 for closed plane curves, 2 for closed surfaces in R^3.
    vertices     : (N, dimension+1) positions.
    faces        : (F, 3) int array for dimension 2, None for curves.
    orientation  : +1 or -1; flips the outward normal choice.
    closed       : curves only; open polylines are admitted solely for the
                   clamped translating-soliton fixture.
    """

    dimension: int
    vertices: np.ndarray
    faces: np.ndarray | None = None
    orientation: int = 1
    closed: bool = True

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=float))
        object.__setattr__(self, "vertices", v)
        if self.faces is not None:
            object.__setattr__(self, "faces", np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64)))

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.dimension + 1

    def bbox_diameter(self) -> float:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def with_vertices(self, vertices: np.ndarray) -> "DiscreteHypersurface":
        return replace(self, vertices=np.asarray(vertices, dtype=float))

    def flipped(self) -> "DiscreteHypersurface":
        return replace(self, orientation=-self.orientation)

    # -- curve helpers -----------------------------------------------------

    def edge_vectors(self) -> np.ndarray:
        """Curve edge vectors v[i+1]-v[i]; for open curves the last entry is absent."""
        if self.dimension != 1:
            raise ValueError("edge_vectors is a curve operation")
        if self.closed:
            return np.roll(self.vertices, -1, axis=0) - self.vertices
        return self.vertices[1:] - self.vertices[:-1]

    def edge_lengths(self) -> np.ndarray:
        if self.dimension == 1:
            return np.linalg.norm(self.edge_vectors(), axis=1)
        v = self.vertices
        f = self.faces
        e = np.stack([v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 1]], v[f[:, 0]] - v[f[:, 2]]])
        return np.linalg.norm(e, axis=2).ravel()

    def enclosed_area(self) -> float:
        """Signed area by the shoelace formula (curves only)."""
        if self.dimension != 1:
            raise ValueError("enclosed_area is a curve operation")
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))

    # -- mesh helpers ------------------------------------------------------

    def face_normals_areas(self) -> tuple[np.ndarray, np.ndarray]:
        v = self.vertices
        f = self.faces
        cr = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        a2 = np.linalg.norm(cr, axis=1)
        if np.any(a2 <= 0):
            raise DegenerateGeometry("zero-area face")
        return self.orientation * cr / a2[:, None], 0.5 * a2

    def enclosed_volume(self) -> float:
        v = self.vertices
        f = self.faces
        return float(np.einsum("ij,ij->", v[f[:, 0]], np.cross(v[f[:, 1]], v[f[:, 2]]))) / 6.0

    def edges_unique(self) -> np.ndarray:
        """Unique undirected edges of a triangle mesh, shape (E, 2)."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def vertex_face_incidence(self) -> list[np.ndarray]:
        inc = [[] for _ in range(self.n_vertices)]
        for fi, tri in enumerate(self.faces):
            for vv in tri:
                inc[vv].append(fi)
        return [np.array(x, dtype=np.int64) for x in inc]

    def connected_components(self) -> list[np.ndarray]:
        """Vertex index sets of the connected components (via faces/edges)."""
        n = self.n_vertices
        parent = np.arange(n)

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        def union(i, j):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[ri] = rj

        if self.dimension == 1:
            m = n if self.closed else n - 1
            for i in range(m):
                union(i, (i + 1) % n)
        else:
            for tri in self.faces:
                union(tri[0], tri[1])
                union(tri[1], tri[2])
        roots = np.array([find(i) for i in range(n)])
        comps = [np.nonzero(roots == r)[0] for r in np.unique(roots)]
        return comps


def validate_surface(surf: DiscreteHypersurface, eps_geom_rel: float = EPS_GEOM_REL) -> None:
    """Raise DegenerateGeometry / ValueError if the manifold invariants fail.

    Checks: closedness (every mesh edge bounded by exactly two faces, polyline
    a single cycle), consistent orientation (shared edges traversed in
    opposite directions), and no edge shorter than eps_geom_rel * diameter.
    """
    eps = eps_geom_rel * max(surf.bbox_diameter(), 1e-300)
    if surf.dimension == 1:
        if surf.n_vertices < (3 if surf.closed else 2):
            raise ValueError("polyline needs at least 3 vertices")
        if np.any(surf.edge_lengths() <= eps):
            raise DegenerateGeometry("polyline edge below eps_geom")
        return
    if surf.faces is None or len(surf.faces) == 0:
        raise ValueError("triangle mesh without faces")
    if np.any(surf.edge_lengths() <= eps):
        raise DegenerateGeometry("mesh edge below eps_geom")
    f = surf.faces
    directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    key = directed[:, 0] * surf.n_vertices + directed[:, 1]
    if len(np.unique(key)) != len(key):
        raise ValueError("inconsistent orientation: repeated directed edge")
    rev = directed[:, 1] * surf.n_vertices + directed[:, 0]
    # closed manifold: every directed edge must be matched by its reverse
    if not np.all(np.isin(key, rev)):
        raise ValueError("mesh is not closed: unmatched boundary edge")


def build_edge_face_adjacency(faces: np.ndarray, n_vertices: int) -> dict[tuple[int, int], list[int]]:
    adj: dict[tuple[int, int], list[int]] = {}
    for fi, tri in enumerate(faces):
        for k in range(3):
            a, b = int(tri[k]), int(tri[(k + 1) % 3])
            adj.setdefault((min(a, b), max(a, b)), []).append(fi)
    return adj


def apply_rigid_motion(surf: DiscreteHypersurface, rotation: np.ndarray, translation: np.ndarray) -> DiscreteHypersurface:
    return surf.with_vertices(surf.vertices @ rotation.T + translation)


def refine_curve(surf: DiscreteHypersurface) -> DiscreteHypersurface:
    """Uniform refinement of a closed curve: insert edge midpoints."""
    v = surf.vertices
    mid = 0.5 * (v + np.roll(v, -1, axis=0))
    out = np.empty((2 * len(v), v.shape[1]))
    out[0::2] = v
    out[1::2] = mid
    return surf.with_vertices(out)


def refine_mesh(surf: DiscreteHypersurface, project_unit_sphere: bool = False) -> DiscreteHypersurface:
    """Loop-style 1->4 topological refinement (midpoint positions)."""
    v = surf.vertices
    f = surf.faces
    edges = {}
    verts = [v]
    nv = len(v)

    def midpoint(a, b):
        nonlocal nv
        key = (min(a, b), max(a, b))
        if key not in edges:
            edges[key] = nv
            verts.append(0.5 * (v[a] + v[b])[None, :])
            nv += 1
        return edges[key]

    new_faces = []
    for a, b, c in f:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        new_faces += [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
    vv = np.concatenate(verts, axis=0)
    if project_unit_sphere:
        vv = vv / np.linalg.norm(vv, axis=1, keepdims=True)
    return DiscreteHypersurface(2, vv, np.array(new_faces, dtype=np.int64), surf.orientation)
