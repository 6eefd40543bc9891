"""Straight-geodesic ray tracing through the immersed complex.

The pullback metric is flat on each simplex and simplex images share facets
isometrically, so a geodesic is an ambient straight line walked through the
abstract adjacency; sheet bookkeeping is exactly the adjacency.  The kernel
is batched: all rays of one query advance together, one facet crossing per
iteration, on gathered barycentric transforms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import DomainComplex
from .errors import NumericalStall

HIT_TRANSVERSAL = "hit-boundary-transversal"
HIT_TANGENTIAL = "hit-boundary-tangential"
EXHAUSTED = "exhausted-length"
LEFT_COMPLEX = "left-complex-error"

EPS_TRANS = 5e-3       # |<dir, facet normal>| below this counts as tangential
_EPS_STEP = 1e-12
_PERTURB = 1e-9


@dataclass
class GeodesicPath:
    origin_vertex: int
    direction: np.ndarray
    chain: np.ndarray          # traversed simplex ids
    exit_point: np.ndarray | None
    exit_kind: str
    length: float
    exit_facet: tuple | None   # (simplex, local_k) of the boundary facet hit
    exit_dot: float = 0.0      # |<dir, boundary normal>| at the hit


class Tracer:
    """Precomputed barycentric transforms for one domain complex."""

    def __init__(self, dc: DomainComplex):
        self.dc = dc
        dim = dc.dimension
        p = dc.vertices[dc.simplices]            # (S, dim+1, dim)
        A = np.concatenate([np.ones((len(p), 1, dim + 1)), np.swapaxes(p, 1, 2)], axis=1)
        self.binv = np.linalg.inv(A)             # lambda = binv @ [1, x]
        self.scale = float(np.abs(dc.vertices).max()) + 1.0
        self._incidence = dc.vertex_incidence()
        # outward normal of each boundary facet, and its vertex set
        self.dim = dim

    def bary(self, simp: np.ndarray, pts: np.ndarray) -> np.ndarray:
        aug = np.concatenate([np.ones((len(pts), 1)), pts], axis=1)
        return np.einsum("bij,bj->bi", self.binv[simp], aug)

    def bary_dir(self, simp: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        aug = np.concatenate([np.zeros((len(dirs), 1)), dirs], axis=1)
        return np.einsum("bij,bj->bi", self.binv[simp], aug)

    def start_simplices(self, vertex: int, dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """For rays leaving a complex vertex: the incident simplex whose corner
        cone best contains each direction.  Returns (simplex ids, quality);
        quality < 0 means the direction points out of the complex."""
        cand = np.array(self._incidence[vertex], dtype=np.int64)
        B = len(dirs)
        best = -np.ones(B, dtype=np.int64)
        bestq = np.full(B, -np.inf)
        for si in cand:
            dl = self.bary_dir(np.full(B, si), dirs)
            local = np.nonzero(self.dc.simplices[si] == vertex)[0][0]
            others = np.delete(np.arange(self.dim + 1), local)
            q = dl[:, others].min(axis=1) / (np.abs(dl).max(axis=1) + 1e-300)
            upd = q > bestq
            bestq[upd] = q[upd]
            best[upd] = si
        return best, bestq

    def boundary_facet_normal(self, simp: int, k: int) -> np.ndarray:
        """Unit normal of a boundary facet (within the simplex's plane/space)."""
        verts = self.dc.vertices
        s = self.dc.simplices[simp]
        fac = np.delete(s, k)
        opp = verts[s[k]]
        p = verts[fac]
        if self.dim == 2:
            t = p[1] - p[0]
            n = np.array([-t[1], t[0]])
        else:
            n = np.cross(p[1] - p[0], p[2] - p[0])
        n = n / np.linalg.norm(n)
        if np.dot(n, opp - p[0]) > 0:
            n = -n
        return n


def trace_batch(tr: Tracer, origin_vertex: int, dirs: np.ndarray, max_lengths: np.ndarray,
                max_steps: int = 100000, record_chains: bool = False):
    """Trace many rays from one boundary (or interior) complex vertex.

    Returns dict of arrays: exit_kind (int code: 0 transversal, 1 tangential,
    2 exhausted, 3 error), length, exit_point, exit_facet (simplex, k),
    exit_dot, chains (optional list of lists).
    """
    dc = tr.dc
    B = len(dirs)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    origin = dc.vertices[origin_vertex]

    simp, quality = tr.start_simplices(origin_vertex, dirs)
    kind = np.full(B, -1, dtype=np.int64)
    length = np.zeros(B)
    exit_pt = np.full((B, tr.dim), np.nan)
    exit_fac = -np.ones((B, 2), dtype=np.int64)
    exit_dot = np.zeros(B)
    perturbed = np.zeros(B, dtype=bool)
    chains = [[] for _ in range(B)] if record_chains else None

    tang_tol = 1e-12 * tr.scale
    outward = quality < -1e-9
    # direction pointing out of the complex at the origin: immediate tangential exit
    kind[outward] = 1
    exit_pt[outward] = origin
    t_cur = np.zeros(B)
    pos0 = np.tile(origin, (B, 1))
    active = kind < 0
    stall_count = np.zeros(B, dtype=np.int64)

    for _ in range(max_steps):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        s = simp[idx]
        lam = tr.bary(s, pos0[idx] + t_cur[idx, None] * dirs[idx])
        dlam = tr.bary_dir(s, dirs[idx])
        # crossing parameter for each facet: lam_k + t*dlam_k = 0
        with np.errstate(divide="ignore", invalid="ignore"):
            t_hit = np.where(dlam < -1e-300, -lam / dlam, np.inf)
        t_hit[t_hit < -1e3 * _EPS_STEP] = np.inf
        k_exit = np.argmin(t_hit, axis=1)
        t_step = t_hit[np.arange(len(idx)), k_exit]

        stalled = ~np.isfinite(t_step)
        # remaining length check
        remain = max_lengths[idx] - t_cur[idx]
        exhaust = t_step >= remain
        done_ex = idx[exhaust & ~stalled]
        kind[done_ex] = 2
        length[done_ex] = max_lengths[done_ex]
        exit_pt[done_ex] = pos0[done_ex] + max_lengths[done_ex, None] * dirs[done_ex]
        active[done_ex] = False

        move = ~exhaust & ~stalled
        mi = idx[move]
        t_new = t_cur[mi] + t_step[move]
        nxt = dc.neighbors[simp[mi], k_exit[move]]
        at_boundary = nxt < 0
        # boundary hits
        for bi, kk, tt in zip(mi[at_boundary], k_exit[move][at_boundary], t_new[at_boundary]):
            n = tr.boundary_facet_normal(simp[bi], kk)
            dot = abs(float(np.dot(dirs[bi], n)))
            kind[bi] = 0 if dot > EPS_TRANS else 1
            exit_dot[bi] = dot
            length[bi] = tt
            exit_pt[bi] = pos0[bi] + tt * dirs[bi]
            exit_fac[bi] = (simp[bi], kk)
            active[bi] = False
        cont = mi[~at_boundary]
        if record_chains:
            for bi in cont:
                chains[bi].append(int(simp[bi]))
        # near-zero advance: count stalls (corner grazing)
        tiny = t_step[move] < _EPS_STEP * tr.scale
        stall_count[cont] = np.where(tiny[~at_boundary], stall_count[cont] + 1, 0)
        simp[cont] = nxt[~at_boundary]
        t_cur[cont] = t_new[~at_boundary]

        # handle stalls: perturb once, then give up
        bad = idx[stalled] if stalled.any() else np.zeros(0, dtype=np.int64)
        looping = cont[stall_count[cont] > 50] if len(cont) else np.zeros(0, dtype=np.int64)
        for bi in np.concatenate([bad, looping]):
            if not perturbed[bi]:
                perturbed[bi] = True
                stall_count[bi] = 0
                d = dirs[bi]
                if tr.dim == 2:
                    rot = np.array([[1, -_PERTURB], [_PERTURB, 1]])
                    d = rot @ d
                else:
                    d = d + _PERTURB * np.array([1.0, -1.0, 0.5])
                dirs[bi] = d / np.linalg.norm(d)
                t_cur[bi] = 0.0
                ss, qq = tr.start_simplices(origin_vertex, dirs[bi][None, :])
                simp[bi] = ss[0]
                if qq[0] < -1e-9:
                    kind[bi] = 1
                    exit_pt[bi] = origin
                    active[bi] = False
            else:
                kind[bi] = 3
                active[bi] = False

    kind[kind < 0] = 3
    return {"kind": kind, "length": length, "exit_point": exit_pt,
            "exit_facet": exit_fac, "exit_dot": exit_dot, "chains": chains,
            "final_simplex": simp}


def trace_geodesic(dc: DomainComplex, origin_surface_vertex: int, direction: np.ndarray,
                   max_length: float, tracer: Tracer | None = None) -> GeodesicPath:
    """Single-ray interface; origin given as a surface vertex id."""
    tr = tracer or Tracer(dc)
    v0 = int(dc.surface_to_complex[origin_surface_vertex])
    res = trace_batch(tr, v0, np.asarray(direction, dtype=float)[None, :],
                      np.array([max_length]), record_chains=True)
    code = int(res["kind"][0])
    kinds = {0: HIT_TRANSVERSAL, 1: HIT_TANGENTIAL, 2: EXHAUSTED, 3: LEFT_COMPLEX}
    if code == 3:
        raise NumericalStall("geodesic trace stalled after perturbation")
    fac = tuple(res["exit_facet"][0]) if res["exit_facet"][0][0] >= 0 else None
    return GeodesicPath(origin_surface_vertex, np.asarray(direction, dtype=float),
                        np.array(res["chains"][0], dtype=np.int64),
                        res["exit_point"][0], kinds[code], float(res["length"][0]),
                        fac, float(res["exit_dot"][0]))
