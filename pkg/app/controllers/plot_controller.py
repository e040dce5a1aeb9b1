"""
Plot Controller for morphdiv
Renders a TSV report as an SVG figure
"""

import logging
from argparse import Namespace
from pathlib import Path

from app.config.settings import Settings
from app.controllers.common import command
from app.exceptions import UsageError
from app.services.plot_service import finite_pairs, plot_service
from app.services.report_service import report_service

# Configure logging
logger = logging.getLogger(__name__)

KINDS = ("scatter", "histogram", "bars", "density")


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("plot", parents=parents, help="Render a TSV report as SVG")
    parser.add_argument("--input", type=str, required=True, help="TSV report to render")
    parser.add_argument("--kind", choices=KINDS, required=True)
    parser.add_argument("--x", type=str, help="X column (scatter, density)")
    parser.add_argument("--y", type=str, help="Y column (scatter, density)")
    parser.add_argument("--yerr", type=str, help="Error bar column (scatter)")
    parser.add_argument("--columns", type=str, help="Comma-separated series (histogram) or segments (bars)")
    parser.add_argument("--label", type=str, help="Bar label column (bars)")
    parser.add_argument("--bins", type=int, default=20, help="Histogram bins")
    parser.add_argument("--point-mass", type=float, help="Draw a point mass at this value instead of a curve (density)")
    parser.add_argument("--title", type=str, default="")
    parser.add_argument("--output", type=str, help="SVG path; defaults to the report name with .svg")
    parser.set_defaults(handler=run_plot)


def _need(args: Namespace, *names: str) -> None:
    missing = [f"--{name}" for name in names if not getattr(args, name, None)]
    if missing:
        raise UsageError(f"plot --kind {args.kind} needs {', '.join(missing)}")


@command
def run_plot(settings: Settings, args: Namespace) -> None:
    """Draw one figure from one report; rows with NA in a plotted column are skipped"""
    table = report_service.read_tsv(Path(args.input))
    if args.kind == "scatter":
        _need(args, "x", "y")
        xs, ys = table.floats(args.x), table.floats(args.y)
        errs = table.floats(args.yerr) if args.yerr else [0.0] * len(xs)
        kept = [(x, y, e) for (x, y), e in zip(zip(xs, ys), errs) if x is not None and y is not None]
        fig = plot_service.scatter(
            [x for x, _, _ in kept], [y for _, y, _ in kept], args.x, args.y, args.title,
            yerr=[e or 0.0 for _, _, e in kept] if args.yerr else None,
        )
    elif args.kind == "histogram":
        _need(args, "columns")
        series = {name: [v for v in table.floats(name) if v is not None] for name in args.columns.split(",")}
        fig = plot_service.stacked_histogram(series, bins=args.bins, title=args.title)
    elif args.kind == "bars":
        _need(args, "columns", "label")
        segments = {name: [v or 0.0 for v in table.floats(name)] for name in args.columns.split(",")}
        fig = plot_service.stacked_bars(table.column(args.label), segments, title=args.title)
    else:
        x_column, y_column = args.x or "x", args.y or "density"
        pairs = finite_pairs(table.floats(x_column), table.floats(y_column))
        fig = plot_service.density([x for x, _ in pairs], [y for _, y in pairs], point_mass=args.point_mass,
                                   xlabel=args.title or "delta")

    output = args.output or str(args.input).rsplit(".", 1)[0] + ".svg"
    plot_service.save_svg(fig, Path(output))
