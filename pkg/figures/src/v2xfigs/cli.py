"""Command line front end: render one figure from a run ledger."""

from __future__ import annotations

import argparse
import sys

from .data import FIGURE_IDS, FigureSpec
from .inputs import FigureError
from .render import render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="v2xfigs",
        description="Render report figures from simulator run ledgers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_render = sub.add_parser("render", help="render a single figure")
    p_render.add_argument("--figure", required=True, choices=FIGURE_IDS,
                          help="which figure to render")
    p_render.add_argument("--ledger", required=True,
                          help="path to the run ledger (JSON lines)")
    p_render.add_argument("--out", required=True,
                          help="output image path (.png, .svg, or .pdf)")
    p_render.add_argument("--series", default=None,
                          help="optional training-series CSV "
                               "(used by the 0a-vs-0c trajectory panel)")
    p_render.set_defaults(func=cmd_render)
    return parser


def cmd_render(args: argparse.Namespace) -> int:
    spec = FigureSpec(figure_id=args.figure, ledger_path=args.ledger,
                      out_path=args.out, series_path=args.series)
    render(spec)
    print(f"wrote {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FigureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
