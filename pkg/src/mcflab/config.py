"""Run configuration: a single versioned JSON document.

Every tolerance in the laboratory has a config key; validation errors name
the offending field.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .flow import FlowConfig
from .surgery import SurgeryConfig

SCHEMA_VERSION = 1

DEFAULTS = {
    "schema": SCHEMA_VERSION,
    "scenario": {"name": "circle", "params": {}},
    "flow": {"c_cfl": 0.1, "max_time": None, "a_stop": 1e4,
             "edge_band": None, "integrator": "explicit", "max_steps": 1000000},
    "shell": {"enabled": False, "delta": None},
    "surgery": {"enabled": False, "h1": 10.0, "h2": 20.0, "h3": 40.0,
                "eps_neck": 0.35, "l0": 10.0, "theta": 2.0,
                "guard_factor": 1e6, "cap_radius_factor": 1.0},
    "diagnostics": {"cadence": 10, "noncollapse": True, "outer": False,
                    "viscosity": False, "monitors": False, "collar_delta": None},
    "output": {"dir": None, "snapshots": True},
    "seed": 0,
}


_FREEFORM = {"scenario.params"}


def _merge(base: dict, override: dict, path="") -> dict:
    out = dict(base)
    for k, v in override.items():
        if k not in base:
            raise ConfigError(f"unknown config field {path + k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict) and (path + k) not in _FREEFORM:
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = v
    return out


def load_config(path_or_dict) -> dict:
    if isinstance(path_or_dict, dict):
        raw = path_or_dict
    else:
        try:
            with open(path_or_dict) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config parse error at line {exc.lineno}: {exc.msg}")
    cfg = _merge(DEFAULTS, raw)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    if cfg["schema"] != SCHEMA_VERSION:
        raise ConfigError(f"schema: expected {SCHEMA_VERSION}, got {cfg['schema']}")
    from .scenarios import SCENARIO_NAMES
    name = cfg["scenario"]["name"].replace("_", "-").replace("limaçon", "limacon")
    if name not in SCENARIO_NAMES:
        raise ConfigError(f"scenario.name: unknown scenario {cfg['scenario']['name']!r}")
    f = cfg["flow"]
    if not (0 < f["c_cfl"] <= 0.5):
        raise ConfigError("flow.c_cfl: must lie in (0, 0.5]")
    if f["edge_band"] is not None:
        lo, hi = f["edge_band"]
        if not lo < hi:
            raise ConfigError("flow.edge_band: needs lmin < lmax")
    s = cfg["surgery"]
    if not (s["h1"] < s["h2"] < s["h3"]):
        raise ConfigError("surgery: needs H1 < H2 < H3")
    if s["theta"] <= 1:
        raise ConfigError("surgery.theta: must exceed 1")
    if cfg["diagnostics"]["cadence"] < 1:
        raise ConfigError("diagnostics.cadence: must be >= 1")
    if cfg["shell"]["delta"] is not None and cfg["shell"]["delta"] <= 0:
        raise ConfigError("shell.delta: must be positive")


def flow_config(cfg: dict) -> FlowConfig:
    f = cfg["flow"]
    import numpy as np
    return FlowConfig(c_cfl=f["c_cfl"],
                      max_time=np.inf if f["max_time"] is None else f["max_time"],
                      a_stop=f["a_stop"],
                      edge_band=tuple(f["edge_band"]) if f["edge_band"] else None,
                      integrator=f["integrator"],
                      max_steps=f["max_steps"])


def surgery_config(cfg: dict) -> SurgeryConfig:
    s = cfg["surgery"]
    return SurgeryConfig(h1=s["h1"], h2=s["h2"], h3=s["h3"], eps_neck=s["eps_neck"],
                         l0=s["l0"], theta=s["theta"], guard_factor=s["guard_factor"],
                         cap_radius_factor=s["cap_radius_factor"])
