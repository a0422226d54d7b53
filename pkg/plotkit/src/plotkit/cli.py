"""Command line: plotkit --metric ber --output figs/ber.png results/*.csv"""

from __future__ import annotations

import argparse
import sys

from .render import PlotSpec, render
from .tables import TableError


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="Render BER/goodput panels from link-simulator result tables.")
    parser.add_argument("tables", nargs="+", help="result CSV files")
    parser.add_argument("--metric", choices=("ber", "goodput"), default="ber")
    parser.add_argument("--output", default="panels.png",
                        help="base image path; a -v<speed>kmh suffix is added per panel")
    parser.add_argument("--scheme", action="append", default=[],
                        help="require and plot only this scheme id (repeatable)")
    parser.add_argument("--label", default="", help="panel title prefix (e.g. pilot pattern)")
    parser.add_argument("--xlim", type=float, nargs=2, default=None)
    parser.add_argument("--ylim", type=float, nargs=2, default=None)
    args = parser.parse_args(argv)
    spec = PlotSpec(
        table_paths=tuple(args.tables), metric=args.metric, output_path=args.output,
        schemes=tuple(args.scheme), group_label=args.label,
        x_limits=tuple(args.xlim) if args.xlim else (),
        y_limits=tuple(args.ylim) if args.ylim else (),
    )
    try:
        for path in render(spec):
            print(path)
    except (TableError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
