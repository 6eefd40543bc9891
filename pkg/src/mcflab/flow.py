"""Time integration of mean curvature flow dX/dt = -H nu.

The step size is tied to the curvature bound: dt = c_cfl / C_A0.  Explicit
Euler moves vertices along stored normals; the semi-implicit variant solves
(M + dt L) X+ = M X with the cotangent (or arc-length) Laplacian of the
current step.  Remeshing keeps edge lengths inside a configured band.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .curvature import CurvatureData, compute_curvature, cotan_laplacian_weights, vertex_areas
from .errors import SingularityReached
from .mesh import DiscreteHypersurface, validate_surface
from . import remesh as _remesh


@dataclass
class FlowConfig:
    c_cfl: float = 0.1
    max_time: float = np.inf
    a_stop: float = 1e4                  # stop threshold on C_A0
    edge_band: tuple[float, float] | None = None   # (lmin, lmax); None = no remeshing
    integrator: str = "explicit"         # "explicit" | "semi-implicit"
    max_steps: int = 1_000_000
    mesh_cfl: float = 0.25               # explicit diffusion cap: dt <= mesh_cfl * h_min^2

    def __post_init__(self):
        if not (0 < self.c_cfl <= 0.5):
            raise ValueError("c_cfl must lie in (0, 0.5]")
        if self.edge_band is not None and not (self.edge_band[0] < self.edge_band[1]):
            raise ValueError("edge band needs lmin < lmax")
        if self.integrator not in ("explicit", "semi-implicit"):
            raise ValueError(f"unknown integrator {self.integrator!r}")


@dataclass
class FlowState:
    time: float
    surface: DiscreteHypersurface
    curvature: CurvatureData
    step: int = 0
    clamp_mask: np.ndarray | None = None
    history: list = field(default_factory=list)  # rows (t, dt, C_A0, minH, maxH)

    @classmethod
    def initial(cls, surface: DiscreteHypersurface, clamp_mask=None) -> "FlowState":
        validate_surface(surface)
        return cls(0.0, surface, compute_curvature(surface), 0, clamp_mask)


def _semi_implicit_positions(surf: DiscreteHypersurface, data: CurvatureData, dt: float) -> np.ndarray:
    n = surf.n_vertices
    if surf.dimension == 1:
        el = surf.edge_lengths()
        inv_next = 1.0 / el
        inv_prev = np.roll(inv_next, 1)
        idx = np.arange(n)
        rows = np.concatenate([idx, idx, idx])
        cols = np.concatenate([idx, (idx + 1) % n, (idx - 1) % n])
        vals = np.concatenate([inv_next + inv_prev, -inv_next, -inv_prev])
        L = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        M = sp.diags(data.vertex_measure)
    else:
        ii, jj, ww = cotan_laplacian_weights(surf)
        idx = np.arange(n)
        diag = np.zeros(n)
        np.add.at(diag, ii, ww)
        L = (sp.csr_matrix((np.concatenate([diag, -ww]),
                            (np.concatenate([idx, ii]), np.concatenate([idx, jj]))),
                           shape=(n, n)))
        M = sp.diags(vertex_areas(surf))
    A = (M + dt * L).tocsc()
    solve = spla.factorized(A)
    out = np.column_stack([solve(M @ surf.vertices[:, k]) for k in range(surf.ambient_dim)])
    return out


def mcf_step(state: FlowState, config: FlowConfig) -> FlowState:
    """One flow step.  Raises SingularityReached when C_A0 >= a_stop.

    dt is the curvature-scale step c_cfl / C_A0; the explicit integrator is
    additionally capped by the mesh diffusion limit mesh_cfl * h_min^2 (the
    two coincide when the remeshing band keeps edges curvature-resolved).
    """
    data = state.curvature
    c_a0 = data.c_a0
    if c_a0 >= config.a_stop:
        raise SingularityReached(state.time, c_a0)
    dt = config.c_cfl / c_a0
    if config.integrator == "explicit":
        h_min = float(state.surface.edge_lengths().min())
        dt = min(dt, config.mesh_cfl * h_min * h_min)
    if state.time + dt > config.max_time:
        dt = config.max_time - state.time

    surf = state.surface
    if config.integrator == "explicit":
        new_v = surf.vertices - dt * data.mean[:, None] * data.normals
    else:
        new_v = _semi_implicit_positions(surf, data, dt)
    if state.clamp_mask is not None:
        new_v[state.clamp_mask] = surf.vertices[state.clamp_mask]

    new_surf = surf.with_vertices(new_v)
    clamp = state.clamp_mask
    if config.edge_band is not None:
        new_surf, clamp = _remesh.enforce_edge_band(new_surf, config.edge_band, clamp)
    new_data = compute_curvature(new_surf)
    hist = state.history + [(state.time + dt, dt, new_data.c_a0,
                             float(new_data.mean.min()), float(new_data.mean.max()))]
    return FlowState(state.time + dt, new_surf, new_data, state.step + 1, clamp, hist)


@dataclass
class Snapshot:
    time: float
    step: int
    surface: DiscreteHypersurface
    curvature: CurvatureData


def run_flow(state: FlowState, config: FlowConfig, hooks=(), snapshot_every: int = 10,
             component_extinction: bool = False):
    """Iterate mcf_step until max_time or SingularityReached.

    hooks: callables hook(state) -> optional replacement FlowState (surgery
    may swap the surface).  Invoked, along with snapshot emission, every
    snapshot_every steps and at termination.

    component_extinction: for multi-component meshes, drop a component whose
    own max |A|^2 exceeds a_stop (recording an extinction) instead of ending
    the run; the run ends when no components remain.

    Returns (snapshots, outcome) where outcome is a dict with keys
    'termination' in {'max_time', 'singularity', 'extinct'}, 'time', 'c_a0',
    'extinctions'.
    """
    snaps = [Snapshot(state.time, state.step, state.surface, state.curvature)]
    extinctions = []
    outcome = {"termination": "max_time", "extinctions": extinctions}

    def emit(st):
        snaps.append(Snapshot(st.time, st.step, st.surface, st.curvature))

    while state.step < config.max_steps and state.time < config.max_time - 1e-15:
        try:
            state = mcf_step(state, config)
        except SingularityReached as exc:
            if component_extinction and state.surface.dimension == 2:
                nxt = _drop_blown_components(state, config, extinctions)
                if nxt is None:
                    outcome["termination"] = "extinct"
                    break
                state = nxt
                continue
            outcome["termination"] = "singularity"
            outcome["time"] = exc.time
            outcome["c_a0"] = exc.c_a0
            emit(state)
            break
        if state.step % snapshot_every == 0:
            for hook in hooks:
                res = hook(state)
                if res is not None:
                    state = res
            emit(state)
    else:
        outcome["termination"] = "max_time"

    if snaps[-1].step != state.step:
        emit(state)
    outcome.setdefault("time", state.time)
    outcome.setdefault("c_a0", state.curvature.c_a0)
    outcome["history"] = state.history
    return snaps, outcome


def _drop_blown_components(state: FlowState, config: FlowConfig, extinctions: list):
    comps = state.surface.connected_components()
    keep_faces = []
    surf = state.surface
    blown = []
    for comp in comps:
        mask = np.zeros(surf.n_vertices, dtype=bool)
        mask[comp] = True
        c_max = float(state.curvature.norm_A_sq[comp].max())
        if c_max >= config.a_stop:
            blown.append((state.time, len(comp), c_max))
        else:
            keep_faces.append(mask)
    if not blown:
        # single component over threshold not separable: treat as terminal
        extinctions.append((state.time, surf.n_vertices, state.curvature.c_a0))
        return None
    extinctions.extend(blown)
    if not keep_faces:
        return None
    keep_v = np.zeros(surf.n_vertices, dtype=bool)
    for m in keep_faces:
        keep_v |= m
    fmask = keep_v[surf.faces].all(axis=1)
    remap = -np.ones(surf.n_vertices, dtype=np.int64)
    remap[keep_v] = np.arange(keep_v.sum())
    new_surf = DiscreteHypersurface(2, surf.vertices[keep_v], remap[surf.faces[fmask]],
                                    surf.orientation)
    return FlowState(state.time, new_surf, compute_curvature(new_surf), state.step,
                     None, state.history)
