"""Command-line front end for the figure renderer.

Maps flags one-to-one onto FigureSpec, renders, and prints the
series-count report so callers can verify what was drawn without
opening the image.
"""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureSpec, RenderError, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crwqed-plots",
        description="Render a crwqed CSV file (or files) to an image.",
    )
    parser.add_argument("--csv", action="append", required=True, dest="csv_paths",
                        metavar="PATH", help="input CSV; repeat for multi-panel kinds")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--out", required=True, dest="output_path", metavar="PATH",
                        help="output image path (.svg preferred, any savefig format)")
    parser.add_argument("--x-label", default=None)
    parser.add_argument("--y-label", default=None)
    parser.add_argument("--log-x", action="store_true")
    parser.add_argument("--log-y", action="store_true")
    parser.add_argument("--value-column", default="F_me",
                        help="heatmap payload column for fidelity_map")
    parser.add_argument("--gamma2", type=float, default=None,
                        help="restrict fidelity_lines to one gamma2 level")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = FigureSpec(
            csv_paths=tuple(args.csv_paths),
            kind=args.kind,
            output_path=args.output_path,
            x_label=args.x_label,
            y_label=args.y_label,
            log_x=args.log_x,
            log_y=args.log_y,
            value_column=args.value_column,
            gamma2=args.gamma2,
        )
        report = render(spec)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for panel in report.panels:
        print(f"panel {panel.name}: {panel.n_series} series ({', '.join(panel.series)})")
    print(f"wrote {report.output_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
