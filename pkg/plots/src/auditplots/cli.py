"""The ``auditplot`` command: one verb, four figure kinds.

Usage: auditplot --kind KIND --in CSV[,CSV] --out PATH [--smooth W]
Exit codes: 0 on success, 2 on malformed input or spec (no file written).
"""

from __future__ import annotations

import argparse
import sys

from .figures import DEFAULT_SMOOTH_WINDOW, FIGURE_KINDS, FigureSpec, PlotError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="auditplot",
        description="Render audit-experiment CSVs into figures.",
    )
    parser.add_argument("--kind", required=True, choices=FIGURE_KINDS,
                        help="which figure to draw")
    parser.add_argument("--in", dest="inputs", required=True,
                        help="input CSV path(s), comma separated")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--smooth", type=int, default=DEFAULT_SMOOTH_WINDOW,
                        help="moving-average window for reward curves")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(
            kind=args.kind,
            inputs=tuple(p for p in args.inputs.split(",") if p.strip()),
            out_path=args.out,
            smooth_window=args.smooth,
        )
        out = render(spec)
    except PlotError as exc:
        print(f"plot error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
