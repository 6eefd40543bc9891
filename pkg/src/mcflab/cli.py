"""Command-line interface.

    mcflab run <config.json> [-o DIR]
    mcflab generate <scenario> [--param k=v ...] -o PATH
    mcflab analyze <geometry> [--domain PATH] [-o DIR]
    mcflab oracle <geometry> --check <name> [--vertex V] [--kappa K]

Exit codes: 0 ok, 2 config error, 3 flow/geometry error, 4 usage.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import io as mio
from .config import load_config
from .curvature import compute_curvature
from .domain import build_domain
from .errors import ConfigError, McflabError
from .mesh import validate_surface
from .noncollapse import all_pairs_sup_Z, inner_sphere_curvature, estimate_monitors
from .oracles import (DoublePointWalker, embedded_curve_visible, embedded_mesh_visible,
                      sphere_lemma_oracle)
from .scenarios import generate
from .visibility import injectivity_radius_proxy


def _parse_params(items):
    out = {}
    for item in items or ():
        k, _, v = item.partition("=")
        try:
            out[k] = int(v)
        except ValueError:
            try:
                out[k] = float(v)
            except ValueError:
                out[k] = v
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="mcflab")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="execute a configured flow run")
    p_run.add_argument("config")
    p_run.add_argument("-o", "--out", default=None)

    p_gen = sub.add_parser("generate", help="emit a scenario's initial geometry")
    p_gen.add_argument("scenario")
    p_gen.add_argument("--param", action="append", metavar="k=v")
    p_gen.add_argument("-o", "--out", required=True)

    p_an = sub.add_parser("analyze", help="one-shot noncollapse report for a geometry file")
    p_an.add_argument("geometry")
    p_an.add_argument("--domain", default=None, help="scenario name providing domain hints")
    p_an.add_argument("-o", "--out", default=None)

    p_or = sub.add_parser("oracle", help="run a brute-force oracle check")
    p_or.add_argument("geometry")
    p_or.add_argument("--check", required=True,
                      choices=["visibility", "sphere-lemma", "all-pairs-z"])
    p_or.add_argument("--vertex", type=int, default=0)
    p_or.add_argument("--kappa", type=float, default=None)
    p_or.add_argument("--scenario", default=None)

    args = ap.parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except McflabError as exc:
        print(f"error: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return 3


def _dispatch(args) -> int:
    if args.cmd == "run":
        from .runner import run
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        out = args.out or os.path.join(mio.output_root(), "run-" + cfg["scenario"]["name"])
        result = run(cfg, out_dir=out)
        print(f"terminated: {result.outcome['termination']} at t={result.outcome.get('time'):.6g}")
        print(f"artifacts in {out}")
        return 0

    if args.cmd == "generate":
        sc = generate(args.scenario, **_parse_params(args.param))
        validate_surface(sc.surface)
        mio.write_surface(args.out, sc.surface)
        print(f"{sc.name}: {sc.surface.n_vertices} vertices -> {args.out}")
        return 0

    if args.cmd == "analyze":
        surf = mio.read_surface(args.geometry)
        validate_surface(surf)
        data = compute_curvature(surf)
        hints = generate(args.domain).domain_hints if args.domain else None
        dc = build_domain(surf, hints)
        rep = inner_sphere_curvature(surf, data, dc)
        inj = injectivity_radius_proxy(dc, surf, data)
        mon = estimate_monitors(surf, data, rep)
        print(f"vertices={surf.n_vertices} C_A0={data.c_a0:.6g} minH={data.mean.min():.6g}")
        print(f"alpha_inner={rep.alpha_inner:.6g} inj={inj:.6g} "
              f"zh_max={mon['zh_max']:.6g} grad_monitor={mon['gradient_monitor']:.6g}")
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            w = mio.CsvWriter(os.path.join(args.out, "noncollapse.csv"), mio.DIAG_COLUMNS)
            zh = mon["zh"]
            for x in range(surf.n_vertices):
                w.row({"t": 0.0, "vertex": x, "H": data.mean[x],
                       "kappa_max": data.kappa_max[x], "Zbar": rep.zbar[x],
                       "partner": int(rep.partner[x]),
                       "partner_class": rep.partner_class[x], "Zlow": None,
                       "alpha_inner": rep.alpha_inner, "alpha_outer": rep.alpha_outer,
                       "R_inner": None, "R_outer": None,
                       "grad_monitor": mon["gradient_monitor"],
                       "zh_monitor": zh[x]})
            w.close()
        return 0

    if args.cmd == "oracle":
        surf = mio.read_surface(args.geometry)
        data = compute_curvature(surf)
        if args.check == "all-pairs-z":
            print(f"all-pairs sup Z = {all_pairs_sup_Z(surf, data):.6g}")
            return 0
        if args.check == "visibility":
            x = args.vertex
            if surf.dimension == 2:
                vis = [y for y in range(surf.n_vertices)
                       if y != x and embedded_mesh_visible(surf, x, y)]
            elif args.scenario == "limacon" or _self_intersects(surf):
                wk = DoublePointWalker(surf)
                vis = [y for y in range(surf.n_vertices) if y != x and wk.visible(x, y)]
            else:
                vis = [y for y in range(surf.n_vertices)
                       if y != x and embedded_curve_visible(surf, x, y)]
            print(f"visible from {x}: {len(vis)} vertices")
            return 0
        if args.check == "sphere-lemma":
            hints = generate(args.scenario).domain_hints if args.scenario else None
            dc = build_domain(surf, hints)
            rep = inner_sphere_curvature(surf, data, dc)
            x = args.vertex
            kappa = args.kappa if args.kappa is not None else float(rep.zbar[x])
            res = sphere_lemma_oracle(surf, data, dc, x, kappa)
            print(f"vertex {x}: ball of curvature {kappa:.6g} "
                  f"{'fits' if res['fits'] else 'does not fit'} "
                  f"(Zbar={rep.zbar[x]:.6g}, witness={res['witness']})")
            return 0
    return 4


def _self_intersects(surf) -> bool:
    from .domain import find_self_crossing
    try:
        find_self_crossing(surf)
        return True
    except McflabError:
        return False


if __name__ == "__main__":
    sys.exit(main())
