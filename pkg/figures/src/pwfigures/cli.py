"""Command line for rendering pwlink CSV outputs.

Usage: pwfigures render --kind q_vs_power --in sweep.csv --out fig.pdf
"""

import argparse
import sys

from .render import PLOT_KINDS, PlotSpec, RenderError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pwfigures")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure from a CSV")
    p.add_argument("--kind", required=True, choices=PLOT_KINDS)
    p.add_argument("--in", dest="input_csv", required=True, help="input CSV path")
    p.add_argument("--out", dest="output_path", required=True, help="output image path")
    p.add_argument("--x-range", nargs=2, type=float, default=None)
    p.add_argument("--y-range", nargs=2, type=float, default=None)
    p.add_argument("--title", default="")
    args = parser.parse_args(argv)

    try:
        spec = PlotSpec(
            kind=args.kind,
            input_csv=args.input_csv,
            output_path=args.output_path,
            x_range=tuple(args.x_range) if args.x_range else None,
            y_range=tuple(args.y_range) if args.y_range else None,
            title=args.title,
        )
        path = render(spec)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
