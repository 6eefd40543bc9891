"""Differential geometry of the discrete hypersurface: normals, principal
curvatures, mean curvature, and the global bound estimates.

Sign convention: the round sphere (or circle) with outward normal has H > 0,
so mean curvature flow shrinks it.  Curves use arc-length second differences
(turning angle over dual length); meshes use the cotangent mean-curvature
vector for the normal direction and a per-vertex quadric (shape-operator) fit
for the principal curvatures.  The stored H is exactly the sum of the stored
principal curvatures.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry
from .mesh import DiscreteHypersurface

EPS_H = 1e-10


@dataclass(frozen=True)
class CurvatureData:
    """Per-vertex curvature quantities of one surface snapshot."""

    normals: np.ndarray          # (N, n+1) unit outward normals
    principal: np.ndarray        # (N, n) principal curvatures, ascending
    principal_dirs: np.ndarray   # (N, n, n+1) unit principal directions
    mean: np.ndarray             # (N,) H = sum of principal curvatures
    norm_A_sq: np.ndarray        # (N,) |A|^2 = sum of squares
    vertex_measure: np.ndarray   # (N,) dual length (n=1) or mixed area (n=2)
    c_a0: float                  # max |A|^2
    c_a1: float                  # max discrete |grad A|^2 (diagnostic only)

    @property
    def kappa_max(self) -> np.ndarray:
        return self.principal[:, -1]

    @property
    def kappa_min(self) -> np.ndarray:
        return self.principal[:, 0]


def compute_curvature(surf: DiscreteHypersurface) -> CurvatureData:
    if surf.dimension == 1:
        return _curve_curvature(surf)
    return _mesh_curvature(surf)


def curvature_bounds(data: CurvatureData) -> tuple[float, float]:
    """(C_A0, C_A1) = max |A|^2 and max discrete |grad A|^2."""
    return data.c_a0, data.c_a1


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------

def _rot90(v: np.ndarray) -> np.ndarray:
    """Rotate plane vectors by -90 degrees: tangent -> outward normal (CCW curve)."""
    return np.stack([v[:, 1], -v[:, 0]], axis=1)


def _curve_curvature(surf: DiscreteHypersurface) -> CurvatureData:
    v = surf.vertices
    n = len(v)
    closed = surf.closed
    e = surf.edge_vectors()
    el = np.linalg.norm(e, axis=1)
    if np.any(el <= 0):
        raise DegenerateGeometry("zero-length curve edge")
    t = e / el[:, None]

    if closed:
        t_prev = np.roll(t, 1, axis=0)
        l_prev = np.roll(el, 1)
        l_next = el
    else:
        # one-sided stencils at the two endpoints
        t_prev = np.vstack([t[:1], t])[:n]
        l_prev = np.concatenate([[el[0]], el])[:n]
        l_next = np.concatenate([el, [el[-1]]])[:n]

    # signed turning angle between consecutive edges
    crossz = t_prev[:, 0] * t[:n if closed else n - 1, 1] if False else None
    if closed:
        ta = np.arctan2(t_prev[:, 0] * t[:, 1] - t_prev[:, 1] * t[:, 0],
                        np.einsum("ij,ij->i", t_prev, t))
        dual = 0.5 * (l_prev + l_next)
        kappa = surf.orientation * ta / dual
        t_vert = t_prev + t
    else:
        ta = np.zeros(n)
        inner = np.arctan2(t[:-1, 0] * t[1:, 1] - t[:-1, 1] * t[1:, 0],
                           np.einsum("ij,ij->i", t[:-1], t[1:]))
        ta[1:-1] = inner
        dual = 0.5 * (l_prev + l_next)
        kappa = surf.orientation * ta / dual
        t_vert = np.empty_like(v)
        t_vert[0] = t[0]
        t_vert[-1] = t[-1]
        t_vert[1:-1] = t[:-1] + t[1:]

    t_vert = t_vert / np.linalg.norm(t_vert, axis=1, keepdims=True)
    normals = surf.orientation * _rot90(t_vert)

    principal = kappa[:, None]
    dirs = t_vert[:, None, :]
    mean = kappa.copy()
    a_sq = kappa ** 2
    c_a0 = float(a_sq.max())
    # |grad A|^2 by centered difference of kappa along arc length
    if closed:
        dk = (np.roll(kappa, -1) - np.roll(kappa, 1)) / (l_prev + l_next)
    else:
        dk = np.gradient(kappa, np.concatenate([[0], np.cumsum(el)]))
    c_a1 = float(np.max(dk ** 2))
    return CurvatureData(normals, principal, dirs, mean, a_sq, dual, c_a0, c_a1)


# ---------------------------------------------------------------------------
# triangle meshes
# ---------------------------------------------------------------------------

def cotan_laplacian_weights(surf: DiscreteHypersurface) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """COO data (i, j, w) of the cotangent weights, one entry per halfedge pair."""
    v = surf.vertices
    f = surf.faces
    ii, jj, ww = [], [], []
    for k in range(3):
        a = f[:, k]
        b = f[:, (k + 1) % 3]
        c = f[:, (k + 2) % 3]
        u1 = v[a] - v[c]
        u2 = v[b] - v[c]
        cr = np.linalg.norm(np.cross(u1, u2), axis=1)
        cot = np.einsum("ij,ij->i", u1, u2) / np.maximum(cr, 1e-300)
        ii.append(a)
        jj.append(b)
        ww.append(0.5 * cot)
        ii.append(b)
        jj.append(a)
        ww.append(0.5 * cot)
    return np.concatenate(ii), np.concatenate(jj), np.concatenate(ww)


def vertex_areas(surf: DiscreteHypersurface) -> np.ndarray:
    """Barycentric (one-third) vertex areas."""
    _, fa = surf.face_normals_areas()
    areas = np.zeros(surf.n_vertices)
    np.add.at(areas, surf.faces.ravel(), np.repeat(fa / 3.0, 3))
    return areas


def _mesh_vertex_normals(surf: DiscreteHypersurface, mc_vec: np.ndarray) -> np.ndarray:
    fn, fa = surf.face_normals_areas()
    nrm = np.zeros_like(surf.vertices)
    np.add.at(nrm, surf.faces.ravel(), np.repeat(fn * fa[:, None], 3, axis=0).reshape(-1, 3))
    ln = np.linalg.norm(nrm, axis=1)
    if np.any(ln <= 0):
        raise DegenerateGeometry("vertex with vanishing area-weighted normal")
    nrm /= ln[:, None]
    # prefer the mean-curvature vector direction where it is well conditioned
    mlen = np.linalg.norm(mc_vec, axis=1)
    good = mlen > EPS_H
    cand = np.zeros_like(nrm)
    cand[good] = -mc_vec[good] / mlen[good, None]
    sign = np.sign(np.einsum("ij,ij->i", cand, nrm))
    use = good & (np.abs(np.einsum("ij,ij->i", cand, nrm)) > 0.5)
    out = nrm.copy()
    out[use] = cand[use] * sign[use, None]
    return out


def _one_ring(surf: DiscreteHypersurface) -> list[np.ndarray]:
    nbr = [set() for _ in range(surf.n_vertices)]
    for a, b, c in surf.faces:
        nbr[a].update((b, c))
        nbr[b].update((a, c))
        nbr[c].update((a, b))
    return [np.fromiter(sorted(s), dtype=np.int64) for s in nbr]


def two_ring(surf: DiscreteHypersurface) -> list[np.ndarray]:
    one = _one_ring(surf)
    out = []
    for i, ring in enumerate(one):
        s = set(ring.tolist())
        for j in ring:
            s.update(one[j].tolist())
        s.discard(i)
        out.append(np.fromiter(sorted(s), dtype=np.int64))
    return out


def _pad_rings(rings: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(r) for r in rings)
    idx = np.zeros((len(rings), width), dtype=np.int64)
    mask = np.zeros((len(rings), width), dtype=bool)
    for i, r in enumerate(rings):
        idx[i, :len(r)] = r
        mask[i, :len(r)] = True
    return idx, mask


def _sym2_eig(s11, s12, s22):
    """Eigen decomposition of symmetric 2x2 matrices, vectorized.

    Returns (lo, hi, c, s) with eigenvector of `lo` = (c, s)."""
    tr2 = 0.5 * (s11 + s22)
    det = s11 * s22 - s12 * s12
    disc = np.sqrt(np.maximum(tr2 * tr2 - det, 0.0))
    lo, hi = tr2 - disc, tr2 + disc
    # eigenvector for lo: (s12, lo - s11) or (lo - s22, s12)
    vx = np.where(np.abs(s12) > 1e-300, s12, lo - s22)
    vy = np.where(np.abs(s12) > 1e-300, lo - s11, np.zeros_like(s12))
    vx = np.where((np.abs(s12) < 1e-300) & (np.abs(lo - s22) < 1e-300), np.ones_like(vx), vx)
    nrm = np.sqrt(vx * vx + vy * vy)
    nrm = np.where(nrm < 1e-300, 1.0, nrm)
    return lo, hi, vx / nrm, vy / nrm


def _mesh_curvature(surf: DiscreteHypersurface) -> CurvatureData:
    v = surf.vertices
    n = surf.n_vertices
    areas = vertex_areas(surf)
    if np.any(areas <= 0):
        raise DegenerateGeometry("vertex star with zero area")

    ii, jj, ww = cotan_laplacian_weights(surf)
    # mean curvature vector: (1/A_i) * sum_j w_ij (x_j - x_i) = -H nu
    mc = np.zeros_like(v)
    np.add.at(mc, ii, ww[:, None] * (v[jj] - v[ii]))
    mc /= areas[:, None]

    normals = _mesh_vertex_normals(surf, mc * surf.orientation)

    idx, mask = _pad_rings(two_ring(surf))
    nu = normals

    def _fit(nu):
        # tangent frame from the first ring neighbor: co-rotates with the
        # surface, so curvatures are rigid-motion invariant to roundoff
        d0 = v[idx[:, 0]] - v
        t1 = d0 - np.einsum("ij,ij->i", d0, nu)[:, None] * nu
        t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
        t2 = np.cross(nu, t1)
        d = v[idx] - v[:, None, :]          # (n, R, 3)
        u = np.einsum("nrk,nk->nr", d, t1)
        w = np.einsum("nrk,nk->nr", d, t2)
        h = np.einsum("nrk,nk->nr", d, nu)
        r2 = u * u + w * w
        cnt = mask.sum(axis=1)
        scale2 = np.where(cnt > 0, (r2 * mask).sum(axis=1) / np.maximum(cnt, 1), 1.0)
        wt = np.exp(-r2 / (2.0 * scale2[:, None])) * mask
        # weighted LS fit  h = p u + q w + 0.5 A u^2 + B u w + 0.5 C w^2
        M = np.stack([u, w, 0.5 * u * u, u * w, 0.5 * w * w], axis=2)
        Mw = M * wt[..., None]
        A = np.einsum("nri,nrj->nij", Mw, M)
        b = np.einsum("nri,nr->ni", Mw, h)
        A += 1e-14 * scale2[:, None, None] ** 2 * np.eye(5)
        try:
            coef = np.linalg.solve(A, b[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise DegenerateGeometry("shape-operator fit failed") from exc
        return coef, t1, t2

    # two passes: the linear terms of the first fit correct the normal to the
    # fitted graph normal, which sharpens the double-point function downstream
    coef, t1, t2 = _fit(nu)
    p, q = coef[:, 0], coef[:, 1]
    nu = nu - p[:, None] * t1 - q[:, None] * t2
    nu /= np.linalg.norm(nu, axis=1, keepdims=True)
    normals = nu
    coef, t1, t2 = _fit(nu)
    p, q, ca, cb, cc = (coef[:, k] for k in range(5))

    # shape operator in the (t1, t2) frame: g^{-1/2} (-Hess/sqrt(1+|grad|^2)) g^{-1/2}
    norm = np.sqrt(1 + p * p + q * q)
    h11, h12, h22 = -ca / norm, -cb / norm, -cc / norm
    g_lo, g_hi, gvx, gvy = _sym2_eig(1 + p * p, p * q, 1 + q * q)
    # g^{-1/2} = V diag(lo,hi)^{-1/2} V^T, V = [[gvx, -gvy], [gvy, gvx]]
    a_, b_ = g_lo ** -0.5, g_hi ** -0.5
    r11 = a_ * gvx * gvx + b_ * gvy * gvy
    r12 = (a_ - b_) * gvx * gvy
    r22 = a_ * gvy * gvy + b_ * gvx * gvx
    s11 = r11 * (h11 * r11 + h12 * r12) + r12 * (h12 * r11 + h22 * r12)
    s12 = r11 * (h11 * r12 + h12 * r22) + r12 * (h12 * r12 + h22 * r22)
    s22 = r12 * (h11 * r12 + h12 * r22) + r22 * (h12 * r12 + h22 * r22)
    k_lo, k_hi, evx, evy = _sym2_eig(s11, s12, s22)

    principal = np.stack([k_lo, k_hi], axis=1)
    d_lo = evx[:, None] * t1 + evy[:, None] * t2
    d_hi = -evy[:, None] * t1 + evx[:, None] * t2
    pdirs = np.stack([d_lo, d_hi], axis=1)

    mean = principal.sum(axis=1)
    a_sq = np.einsum("ij,ij->i", principal, principal)
    c_a0 = float(a_sq.max())

    # |grad A|^2 diagnostic: one-ring least-squares gradient of each kappa
    oidx, omask = _pad_rings(_one_ring(surf))
    od = v[oidx] - v[:, None, :]
    od_t = od - np.einsum("nrk,nk->nr", od, nu)[..., None] * nu[:, None, :]
    od_t *= omask[..., None]
    G = np.einsum("nri,nrj->nij", od_t, od_t) + 1e-12 * np.eye(3)
    grad_sq = np.zeros(n)
    for m in range(2):
        dk = (principal[oidx, m] - principal[:, None, m]) * omask
        rhs = np.einsum("nri,nr->ni", od_t, dk)
        gvec = np.linalg.solve(G, rhs[..., None])[..., 0]
        grad_sq += np.einsum("ni,ni->n", gvec, gvec)
    c_a1 = float(grad_sq.max())

    return CurvatureData(normals, principal, pdirs, mean, a_sq, areas, c_a0, c_a1)


# ---------------------------------------------------------------------------
# scalar calculus on the surface (used by the viscosity-residual machinery)
# ---------------------------------------------------------------------------

def surface_laplacian(surf: DiscreteHypersurface, data: CurvatureData, field: np.ndarray) -> np.ndarray:
    """Discrete Laplace-Beltrami of a vertex scalar field."""
    if surf.dimension == 1:
        if not surf.closed:
            raise ValueError("laplacian needs a closed curve")
        el = surf.edge_lengths()
        l_prev = np.roll(el, 1)
        fwd = (np.roll(field, -1) - field) / el
        bwd = (field - np.roll(field, 1)) / l_prev
        return (fwd - bwd) / data.vertex_measure
    ii, jj, ww = cotan_laplacian_weights(surf)
    out = np.zeros_like(field)
    np.add.at(out, ii, ww * (field[jj] - field[ii]))
    return out / data.vertex_measure


def surface_gradient(surf: DiscreteHypersurface, data: CurvatureData, field: np.ndarray) -> np.ndarray:
    """Per-vertex tangential gradient (N, n+1), via one-ring least squares."""
    v = surf.vertices
    if surf.dimension == 1:
        el = surf.edge_lengths()
        l_prev = np.roll(el, 1)
        df = (np.roll(field, -1) - np.roll(field, 1)) / (el + l_prev)
        return df[:, None] * data.principal_dirs[:, 0, :]
    oidx, omask = _pad_rings(_one_ring(surf))
    nu = data.normals
    od = v[oidx] - v[:, None, :]
    od_t = od - np.einsum("nrk,nk->nr", od, nu)[..., None] * nu[:, None, :]
    od_t *= omask[..., None]
    G = np.einsum("nri,nrj->nij", od_t, od_t) + 1e-12 * np.eye(3)
    df = (field[oidx] - field[:, None]) * omask
    rhs = np.einsum("nri,nr->ni", od_t, df)
    return np.linalg.solve(G, rhs[..., None])[..., 0]
