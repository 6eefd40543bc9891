"""Scenario generators: exact model surfaces and the laboratory test shapes.

Every generator is deterministic.  Immersed scenarios carry the sheet hints
that build_domain needs (crossing bookkeeping for the one-double-point
family); revolution scenarios carry their profile so the volume mesh can be
built structurally.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import UnknownScenario
from .mesh import DiscreteHypersurface, validate_surface


@dataclass
class Scenario:
    name: str
    params: dict
    surface: DiscreteHypersurface
    domain_hints: dict = field(default_factory=dict)
    clamp_mask: np.ndarray | None = None   # vertices held fixed by the flow
    seed: int = 0


SCENARIO_NAMES = (
    "circle", "ellipse", "limacon", "grim-reaper-segment",
    "sphere", "dumbbell", "capsule-cylinder",
)


def generate(name: str, **params) -> Scenario:
    key = name.replace("_", "-")
    if key == "limaçon":
        key = "limacon"
    try:
        maker = _MAKERS[key]
    except KeyError:
        raise UnknownScenario(f"unknown scenario {name!r}; choose from {SCENARIO_NAMES}")
    return maker(**params)


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------

def make_circle(r: float = 1.0, n: int = 256, center=(0.0, 0.0)) -> Scenario:
    th = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    v = np.stack([r * np.cos(th), r * np.sin(th)], axis=1) + np.asarray(center)
    surf = DiscreteHypersurface(1, v)
    validate_surface(surf)
    return Scenario("circle", dict(r=r, n=n), surf, domain_hints={"kind": "embedded-curve", "convex": True})


def make_ellipse(a: float = 2.0, b: float = 1.0, n: int = 256) -> Scenario:
    th = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    v = np.stack([a * np.cos(th), b * np.sin(th)], axis=1)
    surf = DiscreteHypersurface(1, v)
    validate_surface(surf)
    return Scenario("ellipse", dict(a=a, b=b, n=n), surf, domain_hints={"kind": "embedded-curve", "convex": True})


def limacon_point(theta, a, b):
    r = a + b * np.cos(theta)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def limacon_curvature(theta, a, b):
    """Closed-form polar curvature of r = a + b cos(theta)."""
    r = a + b * np.cos(theta)
    rp = -b * np.sin(theta)
    rpp = -b * np.cos(theta)
    return (r * r + 2 * rp * rp - r * rpp) / (r * r + rp * rp) ** 1.5


def make_limacon(a: float = 0.5, b: float = 1.0, n: int = 512,
                 focus: float = 50.0, focus_width: float = 0.04) -> Scenario:
    """Self-intersecting limaçon with an inner loop (requires a < b).

    Sampling density is boosted near the two double-point parameter values so
    the discrete cross-sheet gap resolves the double point well below the
    curve scale; the weight profile is deterministic.
    """
    if not a < b:
        raise ValueError("limaçon inner loop needs a < b")
    th1 = np.arccos(-a / b)
    th2 = 2 * np.pi - th1
    grid = np.linspace(0.0, 2 * np.pi, 20001)
    w = 1.0 + focus * (np.exp(-((grid - th1) / focus_width) ** 2)
                       + np.exp(-((grid - th2) / focus_width) ** 2))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    targets = (np.arange(n) + 0.5) / n
    th = np.interp(targets, cdf, grid)
    v = limacon_point(th, a, b)
    surf = DiscreteHypersurface(1, v)
    validate_surface(surf)
    hints = {"kind": "one-double-point-curve", "a": a, "b": b, "theta": th}
    return Scenario("limacon", dict(a=a, b=b, n=n), surf, domain_hints=hints)


def grim_reaper_height(x):
    return -np.log(np.cos(x))


def make_grim_reaper(margin: float = 0.05, n: int = 400) -> Scenario:
    """Translating-soliton fixture: the curve y = -log cos x closed by a
    straight clamped cap between its two endpoints.

    The cap and the endpoints are clamped; only the soliton arc flows.  The
    filling region (above the curve, under the cap) is on the left of the
    traversal so the outward normal points below the curve and H > 0.
    """
    x = np.linspace(-np.pi / 2 + margin, np.pi / 2 - margin, n)
    arc = np.stack([x, grim_reaper_height(x)], axis=1)
    y_top = arc[0, 1]
    n_cap = max(8, n // 8)
    cap_x = np.linspace(x[-1], x[0], n_cap + 2)[1:-1]
    # slight outward arch keeps the clamped cap strictly convex (and the
    # filling polygon free of exactly collinear chains)
    u = (cap_x - cap_x.mean()) / (0.5 * (cap_x[0] - cap_x[-1]))
    cap = np.stack([cap_x, y_top + 0.05 * (1 - u * u)], axis=1)
    v = np.concatenate([arc, cap], axis=0)
    # traversal: left-to-right along the soliton, right-to-left along the cap;
    # region above the arc is enclosed counterclockwise
    surf = DiscreteHypersurface(1, v)
    validate_surface(surf)
    clamp = np.zeros(len(v), dtype=bool)
    clamp[0] = clamp[n - 1] = True
    clamp[n:] = True
    return Scenario("grim-reaper-segment", dict(margin=margin, n=n), surf,
                    domain_hints={"kind": "embedded-curve", "convex": False},
                    clamp_mask=clamp)


# ---------------------------------------------------------------------------
# surfaces of revolution and the icosphere
# ---------------------------------------------------------------------------

def icosphere(subdivisions: int = 4, r: float = 1.0) -> DiscreteHypersurface:
    phi = (1 + 5 ** 0.5) / 2
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    surf = DiscreteHypersurface(2, verts, faces)
    from .mesh import refine_mesh
    for _ in range(subdivisions):
        surf = refine_mesh(surf, project_unit_sphere=True)
    return surf.with_vertices(surf.vertices * r)


def make_sphere(r: float = 1.0, subdivisions: int = 4) -> Scenario:
    surf = icosphere(subdivisions, r)
    validate_surface(surf)
    return Scenario("sphere", dict(r=r, subdivisions=subdivisions), surf,
                    domain_hints={"kind": "star-shaped"})


def revolve_profile(x: np.ndarray, rho: np.ndarray, n_phi: int) -> DiscreteHypersurface:
    """Closed surface of revolution about the x-axis.

    The profile runs pole to pole: rho[0] = rho[-1] = 0, rho > 0 between.
    Alternate rings are staggered by half an azimuthal step: triangles come
    out near-equilateral and no mesh plane contains a meridian (segments
    between same-azimuth vertices would otherwise thread mesh edges exactly).
    """
    assert rho[0] == 0 and rho[-1] == 0 and np.all(rho[1:-1] > 0)
    phi = np.linspace(0, 2 * np.pi, n_phi, endpoint=False)
    verts = [np.array([[x[0], 0.0, 0.0]])]
    ring_ids = []
    nv = 1
    for i in range(1, len(x) - 1):
        off = (np.pi / n_phi) if (i % 2 == 0) else 0.0
        ring = np.stack([np.full(n_phi, x[i]),
                         rho[i] * np.cos(phi + off), rho[i] * np.sin(phi + off)], axis=1)
        verts.append(ring)
        ring_ids.append(np.arange(nv, nv + n_phi))
        nv += n_phi
    verts.append(np.array([[x[-1], 0.0, 0.0]]))
    pole0, pole1 = 0, nv
    v = np.concatenate(verts, axis=0)

    faces = []
    r0 = ring_ids[0]
    for j in range(n_phi):
        faces.append([pole0, r0[j], r0[(j + 1) % n_phi]])
    for i in range(len(ring_ids) - 1):
        ra, rb = ring_ids[i], ring_ids[i + 1]
        for j in range(n_phi):
            jn = (j + 1) % n_phi
            faces.append([ra[j], rb[j], rb[jn]])
            faces.append([ra[j], rb[jn], ra[jn]])
    rl = ring_ids[-1]
    for j in range(n_phi):
        faces.append([pole1, rl[(j + 1) % n_phi], rl[j]])
    surf = DiscreteHypersurface(2, v, np.array(faces, dtype=np.int64))
    # normal check: x-axis poles at the ends, normals must point outward
    fn, _ = surf.face_normals_areas()
    centers = v[surf.faces].mean(axis=1)
    axis_pt = centers.copy()
    axis_pt[:, 1:] = 0
    out = centers - axis_pt
    out[np.linalg.norm(out, axis=1) < 1e-12] = [1.0, 0, 0]
    if np.median(np.einsum("ij,ij->i", fn, out)) < 0:
        surf = DiscreteHypersurface(2, v, surf.faces[:, ::-1])
    validate_surface(surf)
    return surf


def dumbbell_profile(bell_r: float, neck_rho: float, bell_center: float):
    """C^1 profile: two circular bells bridged by a catenary neck
    rho = rn * cosh(x / w).

    A cosh neck with w > rn is strictly mean convex (the catenoid w = rn is
    the H = 0 borderline).  Solves (w, x_junction) so value and slope match
    the bell circle.  Returns (rho_fn, x_junction, w).
    """
    c, R, rn = bell_center, bell_r, neck_rho

    def solve_w(xj):
        rb = np.sqrt(R * R - (xj - c) ** 2)
        slope = (c - xj) / rb

        def slope_res(w):
            arg = min(xj / w, 500.0)
            return (rn / w) * np.sinh(arg) - slope

        w_lo, w_hi = xj / 500.0 + 1e-12, 1e3
        if slope_res(w_hi) > 0:
            return None, rb
        return brentq(slope_res, w_lo, w_hi), rb

    def value_res(xj):
        w, rb = solve_w(xj)
        if w is None:
            return rn - rb
        return rn * np.cosh(xj / w) - rb

    lo = max(c - R, 0.0) + 1e-6
    xj = brentq(value_res, lo, c - 1e-6)
    w, _ = solve_w(xj)
    if w <= rn:
        raise ValueError("dumbbell neck not mean convex; move bells closer or thicken neck")

    def rho_fn(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        neck = np.abs(x) <= xj
        out[neck] = rn * np.cosh(x[neck] / w)
        bell = ~neck
        out[bell] = np.sqrt(np.maximum(R * R - (np.abs(x[bell]) - c) ** 2, 0.0))
        return out

    return rho_fn, xj, w


def make_dumbbell(bell_r: float = 1.0, neck_rho: float = 0.15,
                  bell_center: float = 1.5, n_axial: int = 48,
                  n_phi: int = 40, neck_spacing: float = 0.025) -> Scenario:
    """Embedded genus-0 dumbbell: two spherical bells joined by a thin neck.

    The neck zone is sampled at neck_spacing so the waist curvature stays
    resolved as it pinches (axial spacing must stay below the waist radius
    at the intended surgery scale).
    """
    rho_fn, xj, _w = dumbbell_profile(bell_r, neck_rho, bell_center)
    x_end = bell_center + bell_r
    xs_bell = x_end * np.sin(np.linspace(0, np.pi / 2, n_axial // 2))
    x_neck = min(xj * 1.6, bell_center)
    xs = np.unique(np.concatenate([
        -xs_bell[::-1], xs_bell,
        np.arange(-x_neck, x_neck + neck_spacing / 2, neck_spacing),
    ]))
    xs = xs[np.argsort(xs)]
    xs[0], xs[-1] = -x_end, x_end
    # drop stations crowding the neck grid from the bell side
    d = np.diff(xs)
    keep = np.concatenate([[True], d > 0.3 * neck_spacing])
    xs = xs[keep]
    rho = rho_fn(xs)
    rho[0] = rho[-1] = 0.0
    keep = np.ones(len(xs), dtype=bool)
    keep[1:-1] = rho[1:-1] > 1e-9
    surf = revolve_profile(xs[keep], rho[keep], n_phi)
    return Scenario("dumbbell", dict(bell_r=bell_r, neck_rho=neck_rho,
                                     bell_center=bell_center, n_phi=n_phi), surf,
                    domain_hints={"kind": "revolution", "profile_x": xs[keep],
                                  "profile_rho": rho[keep], "n_phi": n_phi})


def make_capsule(rho: float = 0.1, length: float = 0.6, n_axial: int = 24,
                 n_phi: int = 32) -> Scenario:
    """Cylinder of radius rho capped by hemispheres (surgery test fixture)."""
    half = length / 2
    t = np.linspace(-np.pi / 2, 0, max(6, n_axial // 3))
    cap_l_x = -half + rho * np.sin(t)
    cap_l_r = rho * np.cos(t)
    xs_mid = np.linspace(-half, half, n_axial)[1:-1]
    t2 = np.linspace(0, np.pi / 2, max(6, n_axial // 3))
    cap_r_x = half + rho * np.sin(t2)
    cap_r_r = rho * np.cos(t2)
    xs = np.concatenate([cap_l_x, xs_mid, cap_r_x])
    rr = np.concatenate([cap_l_r, np.full(len(xs_mid), rho), cap_r_r])
    rr[0] = rr[-1] = 0.0
    surf = revolve_profile(xs, rr, n_phi)
    return Scenario("capsule-cylinder", dict(rho=rho, length=length), surf,
                    domain_hints={"kind": "revolution", "profile_x": xs,
                                  "profile_rho": rr, "n_phi": n_phi})


_MAKERS = {
    "circle": make_circle,
    "ellipse": make_ellipse,
    "limacon": make_limacon,
    "grim-reaper-segment": make_grim_reaper,
    "sphere": make_sphere,
    "dumbbell": make_dumbbell,
    "capsule-cylinder": make_capsule,
}
