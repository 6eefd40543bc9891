"""Edge-band remeshing: split edges longer than lmax, collapse edges shorter
than lmin.  New vertices stay on the current front (edge midpoints), which is
exact for the polyline and first-order for meshes; the band is conservative
(lmax = 2 lmin by default) so churn stays low.
"""
from __future__ import annotations

import numpy as np

from .mesh import DiscreteHypersurface, build_edge_face_adjacency


def enforce_edge_band(surf: DiscreteHypersurface, band: tuple[float, float], clamp_mask=None):
    lmin, lmax = band
    if surf.dimension == 1:
        return _curve_band(surf, lmin, lmax, clamp_mask)
    return _mesh_band(surf, lmin, lmax, clamp_mask)


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------

def _curve_band(surf, lmin, lmax, clamp_mask):
    v = list(map(np.asarray, surf.vertices))
    clamp = list(clamp_mask) if clamp_mask is not None else [False] * len(v)
    closed = surf.closed
    changed = True
    guard = 0
    while changed and guard < 100:
        changed = False
        guard += 1
        out, oc = [], []
        n = len(v)
        m = n if closed else n - 1
        for i in range(n):
            out.append(v[i])
            oc.append(clamp[i])
            if i < m:
                j = (i + 1) % n
                ln = np.linalg.norm(v[j] - v[i])
                if ln > lmax:
                    out.append(0.5 * (v[i] + v[j]))
                    oc.append(bool(clamp[i] and clamp[j]))
                    changed = True
        v, clamp = out, oc
        # collapse pass: merge i into midpoint with its successor
        n = len(v)
        if n <= 4:
            break
        keep = [True] * n
        i = 0
        m = n if closed else n - 1
        while i < m:
            j = (i + 1) % n
            if keep[i] and keep[j] and np.linalg.norm(v[j] - v[i]) < lmin and len(v) - (n - sum(keep)) > 4:
                if not (clamp[i] or clamp[j]):
                    v[i] = 0.5 * (v[i] + v[j])
                    keep[j] = False
                    changed = True
                    i += 2
                    continue
            i += 1
        v = [p for p, k in zip(v, keep) if k]
        clamp = [c for c, k in zip(clamp, keep) if k]
    new = DiscreteHypersurface(1, np.array(v), None, surf.orientation, surf.closed)
    cm = np.array(clamp, dtype=bool) if clamp_mask is not None else None
    return new, cm


# ---------------------------------------------------------------------------
# triangle meshes
# ---------------------------------------------------------------------------

def _mesh_band(surf, lmin, lmax, clamp_mask):
    verts = [p for p in surf.vertices]
    faces = [tuple(int(x) for x in t) for t in surf.faces]
    for _ in range(8):
        did_split = _split_pass(verts, faces, lmax)
        did_collapse = _collapse_pass(verts, faces, lmin)
        if not (did_split or did_collapse):
            break
    verts, faces = _compact(verts, faces)
    new = DiscreteHypersurface(2, np.array(verts), np.array(faces, dtype=np.int64),
                               surf.orientation)
    return new, clamp_mask


def _split_pass(verts, faces, lmax) -> bool:
    adj = build_edge_face_adjacency(np.array(faces, dtype=np.int64), len(verts))
    to_split = []
    for (a, b), fs in adj.items():
        if len(fs) == 2 and np.linalg.norm(verts[a] - verts[b]) > lmax:
            to_split.append((a, b))
    if not to_split:
        return False
    split_set = set()
    touched = set()
    for a, b in sorted(to_split, key=lambda e: -np.linalg.norm(verts[e[0]] - verts[e[1]])):
        if a in touched or b in touched:
            continue
        split_set.add((a, b))
        touched.update((a, b))
    new_faces = []
    midpoint_of = {}
    for e in split_set:
        midpoint_of[e] = len(verts)
        verts.append(0.5 * (verts[e[0]] + verts[e[1]]))
    for tri in faces:
        done = False
        for k in range(3):
            a, b, c = tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]
            key = (min(a, b), max(a, b))
            if key in midpoint_of:
                m = midpoint_of[key]
                new_faces.append((a, m, c))
                new_faces.append((m, b, c))
                done = True
                break
        if not done:
            new_faces.append(tri)
    faces[:] = new_faces
    return True


def _collapse_pass(verts, faces, lmin) -> bool:
    farr = np.array(faces, dtype=np.int64)
    adj = build_edge_face_adjacency(farr, len(verts))
    ring = {}
    for tri in faces:
        for k in range(3):
            ring.setdefault(tri[k], set()).update((tri[(k + 1) % 3], tri[(k + 2) % 3]))
    cands = [(np.linalg.norm(verts[a] - verts[b]), a, b) for (a, b), fs in adj.items()
             if len(fs) == 2 and np.linalg.norm(verts[a] - verts[b]) < lmin]
    if not cands:
        return False
    cands.sort(key=lambda t: t[0])
    dead = set()
    collapsed = {}
    did = False
    for _, a, b in cands:
        if a in dead or b in dead or a in collapsed or b in collapsed:
            continue
        # link condition: shared one-ring of a and b must be exactly the two
        # opposite vertices, else the collapse pinches the surface
        shared = ring[a] & ring[b]
        if len(shared) != 2:
            continue
        mid = 0.5 * (verts[a] + verts[b])
        if not _collapse_keeps_valid(verts, faces, a, b, mid):
            continue
        verts[a] = mid
        collapsed[b] = a
        dead.add(b)
        did = True
    if not did:
        return False
    new_faces = []
    for tri in faces:
        t = tuple(collapsed.get(x, x) for x in tri)
        if len(set(t)) == 3:
            new_faces.append(t)
    faces[:] = new_faces
    return True


def _collapse_keeps_valid(verts, faces, a, b, mid) -> bool:
    """Reject collapses that flip or squash any surviving incident face."""
    for tri in faces:
        if a in tri or b in tri:
            t = [mid if (x == a or x == b) else verts[x] for x in tri]
            if len({id(x) if isinstance(x, np.ndarray) and x is mid else x.tobytes() if isinstance(x, np.ndarray) else x for x in t}) < 3:
                continue
            if sum(1 for x in tri if x == a or x == b) == 2:
                continue  # face dies with the edge
            old = np.cross(verts[tri[1]] - verts[tri[0]], verts[tri[2]] - verts[tri[0]])
            new = np.cross(t[1] - t[0], t[2] - t[0])
            no = np.linalg.norm(old)
            nn = np.linalg.norm(new)
            if nn < 0.05 * no or (no > 0 and np.dot(old, new) < 0):
                return False
    return True


def _compact(verts, faces):
    used = sorted({x for tri in faces for x in tri})
    remap = {old: new for new, old in enumerate(used)}
    return [verts[i] for i in used], [tuple(remap[x] for x in tri) for tri in faces]
