"""Command-line wrapper: one subcommand per figure kind."""

from __future__ import annotations

import argparse
import sys

from .figures import SchemaError, plot_log_ratio, plot_phase_curve, plot_rho


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greedyclean-plots",
        description="Render figures from greedyclean CSV outputs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    phase = sub.add_parser("phase-curve", help="violation frequency vs alpha")
    phase.add_argument("input", help="sweep.csv")
    phase.add_argument("--out", required=True, help="output image (.png or .svg)")
    phase.add_argument("--title", default="Settled-doubling frequency")
    phase.set_defaults(fn=lambda a: plot_phase_curve(a.input, a.out, title=a.title))

    ratio = sub.add_parser("log-ratio", help="escape tail exponent vs log10 x")
    ratio.add_argument("input", help="oracle.csv")
    ratio.add_argument("--out", required=True)
    ratio.add_argument("--title", default="Escape tail exponent")
    ratio.set_defaults(fn=lambda a: plot_log_ratio(a.input, a.out, title=a.title))

    rho = sub.add_parser("rho", help="step plot of the closest-dust distance")
    rho.add_argument("input", help="rho.csv")
    rho.add_argument("--out", required=True)
    rho.add_argument("--title", default="Closest surviving dust")
    rho.set_defaults(fn=lambda a: plot_rho(a.input, a.out, title=a.title))

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.fn(args)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
