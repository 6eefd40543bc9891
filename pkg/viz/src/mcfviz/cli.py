"""CLI: mcflab-render <run-dir> --fig <kind> -o <file> [--style k=v ...]"""
from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_KINDS, FigureSpec, SchemaError, render


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="mcflab-render")
    ap.add_argument("run_dir")
    ap.add_argument("--fig", required=True, choices=FIGURE_KINDS)
    ap.add_argument("-o", "--out", required=True)
    ap.add_argument("--style", action="append", metavar="k=v", default=[])
    args = ap.parse_args(argv)
    style = {}
    for item in args.style:
        k, _, v = item.partition("=")
        style[k] = v
    try:
        render(FigureSpec(args.run_dir, args.fig, args.out, style))
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
