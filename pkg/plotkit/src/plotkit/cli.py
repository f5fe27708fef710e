"""Command line for rendering profile and top-view figures from run logs."""

from __future__ import annotations

import argparse
import sys

from .profiles import ProfileFigureSpec, render_profiles
from .schema import SchemaError
from .topview import render_topview


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotkit", description="Figures from intersection-game run logs."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_prof = sub.add_parser("profiles", help="4-row time-profile figure")
    p_prof.add_argument("csv", nargs="+", help="one or two run logs")
    p_prof.add_argument("--titles", nargs="*", default=None)
    p_prof.add_argument("--out", default="profiles.pdf")
    p_prof.set_defaults(func=cmd_profiles)

    p_top = sub.add_parser("topview", help="top-view lapse frames")
    p_top.add_argument("csv")
    p_top.add_argument("--times", required=True,
                       help="comma-separated frame times in seconds")
    p_top.add_argument("--out", default="topview.pdf")
    p_top.set_defaults(func=cmd_topview)
    return parser


def cmd_profiles(args: argparse.Namespace) -> int:
    spec = ProfileFigureSpec(args.csv, tuple(args.titles or ()))
    out = render_profiles(spec, args.out)
    print(out)
    return 0


def cmd_topview(args: argparse.Namespace) -> int:
    times = [float(v) for v in args.times.split(",")]
    out = render_topview(args.csv, times, args.out)
    print(out)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
