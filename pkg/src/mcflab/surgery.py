"""Neck detection and cut-and-cap surgery for n=2 flows.

The curvature-scale guard H1 * r0 > guard_factor * L0 * Theta gates all
surgery; the published factor 1e6 makes desk meshes infeasible (it forces a
micron-scale neck on a unit dumbbell), so runs may set a logged lab-scale
override while the exact arithmetic stays the default.  Necks are detected as
connected cylindrical regions (principal-curvature ratio plus a fitted-
cylinder quality score); surgery removes the neck between two cross-section
loops and glues a spherical cap on each, then re-validates the components.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curvature import compute_curvature
from .errors import CapGlueFailure, GuardViolated
from .mesh import DiscreteHypersurface, validate_surface

GUARD_FACTOR_EXACT = 1e6


@dataclass
class SurgeryConfig:
    h1: float = 10.0
    h2: float = 20.0
    h3: float = 40.0
    eps_neck: float = 0.35          # cylinder-fit quality tolerance
    l0: float = 10.0                # max rescaled neck length
    theta: float = 2.0              # neck-scale ratio
    guard_factor: float = GUARD_FACTOR_EXACT   # 1e6 exact; lab override logged
    cap_radius_factor: float = 1.0  # 1.0 = hemispherical caps (C1 on a cylinder)

    def __post_init__(self):
        if not (self.h1 < self.h2 < self.h3):
            raise ValueError("surgery thresholds need H1 < H2 < H3")
        if self.theta <= 1:
            raise ValueError("Theta must exceed 1")


def h1_scale_guard(config: SurgeryConfig, r0: float) -> tuple[bool, float]:
    """Pass iff H1 * r0 > guard_factor * L0 * Theta; margin is the ratio."""
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    margin = config.h1 * r0 / (config.guard_factor * config.l0 * config.theta)
    return margin > 1.0, margin


@dataclass
class NeckRegion:
    vertex_ids: np.ndarray
    axis_point: np.ndarray
    axis_dir: np.ndarray
    rho: float
    rescaled_length: float
    quality: float                 # max rescaled deviation from the fitted cylinder
    bounding_radius: float         # radius of the smallest ball around the region


def detect_neck(surface: DiscreteHypersurface, data, config: SurgeryConfig) -> list[NeckRegion]:
    """Connected cylindrical regions: |k1| small versus k2 and H above the
    detection scale, iteratively trimmed to the fitted tube until the
    rescaled deviation stays within eps_neck."""
    if float(data.mean.max()) < config.h2:
        return []
    k1 = data.principal[:, 0]
    k2 = data.principal[:, 1]
    cyl = (np.abs(k1) < config.eps_neck * np.abs(k2)) & (k2 > 0) & (data.mean >= config.h2)
    visited = np.zeros(surface.n_vertices, dtype=bool)
    nbr = [[] for _ in range(surface.n_vertices)]
    for a, b, c in surface.faces:
        nbr[a] += [b, c]
        nbr[b] += [a, c]
        nbr[c] += [a, b]

    def grow(seed, admit):
        comp = []
        stack = [int(seed)]
        seen = {int(seed)}
        while stack:
            u = stack.pop()
            comp.append(u)
            for w in nbr[u]:
                if w not in seen and admit[w]:
                    seen.add(int(w))
                    stack.append(int(w))
        return np.array(comp, dtype=np.int64)

    necks = []
    for seed in np.nonzero(cyl)[0]:
        if visited[seed]:
            continue
        comp = grow(seed, cyl)
        visited[comp] = True
        if len(comp) < 16:
            continue
        region = _fit_neck_trimmed(surface, data, comp, config, nbr)
        if region is not None:
            necks.append(region)
    return necks


def _cylinder_fit(surface, data, comp):
    pts = surface.vertices[comp]
    center = pts.mean(axis=0)
    dirs = data.principal_dirs[comp, 0, :]
    ref = dirs[0]
    dirs = dirs * np.sign(dirs @ ref)[:, None]
    axis = dirs.mean(axis=0)
    axis /= np.linalg.norm(axis)
    rel = pts - center
    axial = rel @ axis
    radial = np.linalg.norm(rel - axial[:, None] * axis, axis=1)
    return center, axis, axial, radial


def _fit_neck_trimmed(surface, data, comp, config, nbr) -> NeckRegion | None:
    """Refit and trim until the region is a clean tube around the seed."""
    seed = comp[int(np.argmax(data.mean[comp]))]
    for _ in range(5):
        center, axis, axial, radial = _cylinder_fit(surface, data, comp)
        rho = float(radial.mean())
        if rho <= 0 or len(comp) < 16:
            return None
        ok = np.abs(radial - rho) <= config.eps_neck * rho
        if ok.all():
            break
        keep = set(comp[ok].tolist())
        if int(seed) not in keep:
            return None
        admit = np.zeros(surface.n_vertices, dtype=bool)
        admit[list(keep)] = True
        sub = []
        stack = [int(seed)]
        seen = {int(seed)}
        while stack:
            u = stack.pop()
            sub.append(u)
            for w in nbr[u]:
                if w not in seen and admit[w]:
                    seen.add(int(w))
                    stack.append(int(w))
        comp = np.array(sub, dtype=np.int64)
    else:
        return None
    center, axis, axial, radial = _cylinder_fit(surface, data, comp)
    rho = float(radial.mean())
    quality = float(np.abs(radial - rho).max() / rho)
    if quality > config.eps_neck:
        return None
    h = data.mean[comp]
    lo = 1.0 / (config.theta * rho * (1 + config.eps_neck))
    hi = (1 + config.eps_neck) * config.theta / rho
    if h.min() < lo or h.max() > hi:
        return None
    rel = surface.vertices[comp] - center
    length = float(axial.max() - axial.min())
    bounding = float(np.linalg.norm(rel, axis=1).max())
    return NeckRegion(comp, center, axis, rho, length / rho, quality, bounding)


def perform_surgery(surface: DiscreteHypersurface, neck: NeckRegion,
                    config: SurgeryConfig, r0: float | None = None,
                    data=None) -> DiscreteHypersurface:
    """Cut the neck between two cross-section planes and cap both loops with
    spherical caps (position-continuous, near-normal-continuous on a true
    cylinder).  Returns the new (possibly multi-component) surface.
    """
    if data is None:
        data = compute_curvature(surface)
    if float(data.mean.max()) < config.h3:
        raise GuardViolated(f"surgery requested below the H3 trigger (max H = {data.mean.max():.4g})")
    if r0 is not None:
        ok, margin = h1_scale_guard(config, r0)
        if not ok:
            raise GuardViolated(f"curvature-scale guard fails (margin {margin:.3g})")
        if neck.bounding_radius >= r0:
            raise GuardViolated("neck is not contained in a ball of radius r0")

    axis, c0 = neck.axis_dir, neck.axis_point
    s = (surface.vertices - c0) @ axis
    s_neck = (surface.vertices[neck.vertex_ids] - c0) @ axis
    span = s_neck.max() - s_neck.min()
    # cut where the tube has fattened to ~2.4/H3, so the hemispherical caps
    # come in below the trigger curvature; fall back to the neck ends
    target_rho = 2.4 / config.h3
    radial_all = np.linalg.norm(surface.vertices - c0
                                - s[:, None] * axis, axis=1)
    near = np.abs(s) <= 1.5 * (span / 2 + neck.rho)
    cut_lo, cut_hi = s_neck.min() + 0.15 * span, s_neck.max() - 0.15 * span
    for side in (-1, 1):
        sel = near & (side * s > 0)
        if not sel.any():
            continue
        ss = s[sel]
        rr = radial_all[sel]
        order = np.argsort(side * ss)
        fat = rr[order] >= target_rho
        if fat.any():
            cut = ss[order][int(np.argmax(fat))]
            if side < 0:
                cut_lo = cut
            else:
                cut_hi = cut
    if cut_lo >= cut_hi:
        cut_lo = s_neck.min() + 0.15 * span
        cut_hi = s_neck.max() - 0.15 * span
    # keep the cut planes clear of vertex stations (no micro edges at the rim)
    s_sorted = np.unique(np.round(s[near] / (1e-6 * (1 + abs(s).max()))) * (1e-6 * (1 + abs(s).max())))
    def snap(cut):
        k = np.searchsorted(s_sorted, cut)
        if 0 < k < len(s_sorted):
            return 0.5 * (s_sorted[k - 1] + s_sorted[k])
        return cut
    cut_lo, cut_hi = snap(cut_lo), snap(cut_hi)
    mid = 0.5 * (cut_lo + cut_hi)

    out_v, out_f = _cut_and_cap(surface, axis, c0, cut_lo, cut_hi, mid, config)
    new = DiscreteHypersurface(2, out_v, out_f, surface.orientation)
    validate_surface(new)
    return new


def _cut_and_cap(surface, axis, c0, cut_lo, cut_hi, mid, config):
    v = surface.vertices
    f = surface.faces
    s = (v - c0) @ axis

    out_v = [p for p in v]
    out_f = []
    loops = {}
    for side, cut, keep_sign in (("lo", cut_lo, -1.0), ("hi", cut_hi, +1.0)):
        cross_pts = {}
        ring_edges = []
        for tri in f:
            sv = s[tri] - cut
            if keep_sign > 0:
                keep = sv > 0
            else:
                keep = sv < 0
            if keep.all():
                continue  # handled below (kept or dropped globally)
            if not keep.any():
                continue
            # split edges crossing the plane
            pts_local = []
            for k in range(3):
                a, b = int(tri[k]), int(tri[(k + 1) % 3])
                if (keep[k]) != (keep[(k + 1) % 3]):
                    key = (min(a, b), max(a, b))
                    if key not in cross_pts:
                        t = (cut - s[a]) / (s[b] - s[a])
                        cross_pts[key] = len(out_v)
                        out_v.append(v[a] + t * (v[b] - v[a]))
                    pts_local.append((k, cross_pts[key]))
            kept_ids = [int(tri[k]) for k in range(3) if keep[k]]
            if len(kept_ids) == 1 and len(pts_local) == 2:
                kv = kept_ids[0]
                kk = [k for k in range(3) if keep[k]][0]
                # boundary walk from kv meets the crossing on its own edge first
                (k1, p1), (k2, p2) = pts_local
                pa, pb = (p1, p2) if k1 == kk else (p2, p1)
                out_f.append((kv, pa, pb))
                ring_edges.append((pa, pb))
            elif len(kept_ids) == 2 and len(pts_local) == 2:
                # walk the triangle boundary, inserting crossings after the
                # corner starting their edge: gives the surviving quad in order
                tri_seq = []
                for k in range(3):
                    if keep[k]:
                        tri_seq.append(int(tri[k]))
                    crossing = [p for (kk2, p) in pts_local if kk2 == k]
                    if crossing:
                        tri_seq.append(crossing[0])
                out_f.append((tri_seq[0], tri_seq[1], tri_seq[2]))
                out_f.append((tri_seq[0], tri_seq[2], tri_seq[3]))
                cross_set = {p for _k, p in pts_local}
                for i in range(4):
                    u, w = tri_seq[i], tri_seq[(i + 1) % 4]
                    if u in cross_set and w in cross_set:
                        ring_edges.append((u, w))
                        break
        loops[side] = _order_loop(ring_edges, out_v)

    keep_mask_tri = []
    for tri in f:
        sm = s[tri]
        if np.all(sm <= cut_lo) or np.all(sm >= cut_hi):
            keep_mask_tri.append(tuple(int(x) for x in tri))
    out_f = keep_mask_tri + out_f

    # each cap bulges into the removed gap: +axis for the low piece, -axis
    # for the high piece; its rim angle continues the local flare slope
    for side, cut, outward in (("lo", cut_lo, +1.0), ("hi", cut_hi, -1.0)):
        loop = loops[side]
        if loop is None or len(loop) < 3:
            raise CapGlueFailure(f"cross-section loop on side {side} is not closed")
        keep_side = s < cut if side == "lo" else s > cut
        band = keep_side & (np.abs(s - cut) < 0.35 * abs(cut_hi - cut_lo) + 1e-12)
        phi0 = np.pi / 2
        if band.sum() >= 8:
            ss = s[band]
            rr = np.linalg.norm(v[band] - c0 - ss[:, None] * axis, axis=1)
            m = np.polyfit(ss, rr, 1)[0]
            # slope away from the gap: rim tangent tilts by atan(|m|)
            phi0 = max(np.pi / 6, np.pi / 2 - np.arctan(abs(m)))
        # cap triangles must traverse the rim opposite to the cut faces
        _add_cap(out_v, out_f, loop[::-1], axis * outward, config, phi0)

    verts = np.array(out_v)
    used = sorted({x for tri in out_f for x in tri})
    remap = -np.ones(len(verts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    faces = np.array([[remap[x] for x in tri] for tri in out_f], dtype=np.int64)
    return verts[used], faces


def _order_loop(ring_edges, out_v):
    if not ring_edges:
        return None
    nxt = {}
    for a, b in ring_edges:
        nxt[a] = b
    start = ring_edges[0][0]
    loop = [start]
    cur = nxt.get(start)
    guard = 0
    while cur is not None and cur != start and guard < len(nxt) + 2:
        loop.append(cur)
        cur = nxt.get(cur)
        guard += 1
    if cur != start:
        return None
    return loop


def _add_cap(out_v, out_f, loop, outward_axis, config, phi0=np.pi / 2):
    """Spherical cap over an (approximately circular, planar) loop.

    planarity is checked against eps-glue = 0.2 * rho; the cap is a fan of
    rings from the rim (polar angle phi0, matched to the local flare slope for
    near-tangent gluing; pi/2 = hemisphere on a cylinder) down to the pole.
    cap_radius_factor > 1 flattens the cap further.
    """
    pts = np.array([out_v[i] for i in loop])
    center = pts.mean(axis=0)
    axis = outward_axis / np.linalg.norm(outward_axis)
    planar_dev = np.abs((pts - center) @ axis)
    rho = float(np.linalg.norm(np.cross(axis, pts - center), axis=1).mean())
    if planar_dev.max() > 0.2 * rho:
        raise CapGlueFailure("cross-section loop not planar within eps_glue")
    sin0 = min(np.sin(phi0) / config.cap_radius_factor, 1.0)
    phi0 = np.arcsin(sin0)
    R = rho / sin0
    n_rings = max(3, int(np.ceil(phi0 / (2 * np.pi / max(len(loop), 8)))))
    sphere_c = center - R * np.cos(phi0) * axis
    prev_ring = list(loop)
    prev_pts = pts
    for k in range(1, n_rings):
        phi = phi0 * (1 - k / n_rings)
        ring_r = R * np.sin(phi)
        zc = sphere_c + R * np.cos(phi) * axis
        ring_ids = []
        scale = ring_r / max(rho, 1e-300)
        for p in pts:
            radial = p - center
            radial = radial - (radial @ axis) * axis
            q = zc + radial * scale
            ring_ids.append(len(out_v))
            out_v.append(q)
        for i in range(len(loop)):
            j = (i + 1) % len(loop)
            out_f.append((prev_ring[i], prev_ring[j], ring_ids[j]))
            out_f.append((prev_ring[i], ring_ids[j], ring_ids[i]))
        prev_ring = ring_ids
    pole = len(out_v)
    out_v.append(sphere_c + R * axis)
    for i in range(len(loop)):
        j = (i + 1) % len(loop)
        out_f.append((prev_ring[i], prev_ring[j], pole))
