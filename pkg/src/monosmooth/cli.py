"""Command-line front end: fit, cdf, eval, and plot subcommands.

Exit codes: 0 for an optimal fit, 2 when the node budget was exhausted
(best incumbent still written), 1 for any input error.  All error messages
go to standard error with an ``error:`` prefix.  Set MONOSMOOTH_LOG to
debug/info/warning to control library logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import cdf as cdf_mod
from . import spline as spline_mod
from .bnb import BnBConfig, SolveStatus, solve
from .errors import MonosmoothError
from .problem import BoundaryMode, ProblemSpec, load_csv, validate

log = logging.getLogger("monosmooth.cli")


def _configure_logging() -> None:
    level_name = os.environ.get("MONOSMOOTH_LOG", "").strip().upper()
    if level_name:
        logging.basicConfig(format="%(name)s %(levelname)s: %(message)s")
        logging.getLogger("monosmooth").setLevel(getattr(logging, level_name, logging.INFO))


def _write_report(report, spec: ProblemSpec, path: Path) -> None:
    doc = {
        "status": report.status,
        "objective": report.objective,
        "root_objective": report.root_objective,
        "gap": report.gap,
        "nodes_explored": report.nodes_explored,
        "nodes_pruned": report.nodes_pruned,
        "tree_depth": report.tree_depth,
        "lambda": spec.lam,
        "x_max": spec.x_max,
        "boundary": spec.boundary.value,
        "knots": list(report.kv.knots),
        "values": list(report.kv.values),
        "slopes": list(report.kv.slopes),
    }
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _fit_and_write(spec: ProblemSpec, out_dir: Path, cfg: BnBConfig, with_density: bool) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    report, curve = solve(spec, cfg)
    spline_mod.write_json(curve, out_dir / "spline.json")
    spline_mod.write_samples_csv(curve, out_dir / "samples.csv")
    _write_report(report, spec, out_dir / "report.json")
    if with_density:
        spline_mod.write_json(cdf_mod.density(curve), out_dir / "density.json")
    log.info("fit finished: %s, objective %.6g", report.status, report.objective)
    return 2 if report.status == SolveStatus.ITERATION_LIMIT else 0


def cmd_fit(args) -> int:
    points = load_csv(args.input, weights_column=args.weights_column)
    boundary = BoundaryMode.PINNED_ZERO if args.boundary == "pinned" else BoundaryMode.FREE_START
    spec = validate(
        ProblemSpec(data=tuple(points), x_max=args.xmax, lam=args.lam, boundary=boundary)
    )
    cfg = BnBConfig(max_nodes=args.max_nodes, tol_gap=args.tol, threads=args.threads)
    return _fit_and_write(spec, Path(args.out), cfg, with_density=False)


def cmd_cdf(args) -> int:
    if args.samples:
        samples = cdf_mod.load_samples_csv(args.samples)
        spec = cdf_mod.samples_to_cdf_data(samples, bins=args.bins, lam=args.lam)
    else:
        hist = cdf_mod.load_histogram_csv(args.histogram)
        spec = cdf_mod.histogram_to_cdf_data(hist, lam=args.lam)
    cfg = BnBConfig(max_nodes=args.max_nodes, tol_gap=args.tol, threads=args.threads)
    return _fit_and_write(spec, Path(args.out), cfg, with_density=True)


def cmd_eval(args) -> int:
    curve = spline_mod.read_json(args.spline)
    ts = [float(t) for t in args.at]
    rows = []
    for t in ts:
        x = spline_mod.eval_curve(curve, t, 0, clamp=args.clamp)
        dx = spline_mod.eval_curve(curve, t, 1, clamp=args.clamp)
        ddx = spline_mod.eval_curve(curve, t, 2, clamp=args.clamp)
        rows.append((t, x, dx, ddx))
    lines = ["t,x,dx,ddx"] + [f"{t!r},{x!r},{dx!r},{ddx!r}" for t, x, dx, ddx in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# SVG plotting (dependency-free, deterministic output for golden tests).
# ---------------------------------------------------------------------------

def _svg_path(xs, ys, to_px) -> str:
    pts = [to_px(x, y) for x, y in zip(xs, ys)]
    return "M " + " L ".join(f"{px:.2f} {py:.2f}" for px, py in pts)


def _panel(svg: list, curve, data_points, x0, y0, w, h, title: str) -> None:
    lo, hi = curve.domain
    ts = np.linspace(lo, hi, 257)
    ys = np.array([spline_mod.eval_curve(curve, float(t)) for t in ts])
    y_all = list(ys) + [p[1] for p in data_points]
    y_min, y_max = min(y_all), max(y_all)
    span_y = (y_max - y_min) or 1.0
    y_min -= 0.05 * span_y
    y_max += 0.05 * span_y

    def to_px(t, y):
        px = x0 + (t - lo) / (hi - lo) * w
        py = y0 + h - (y - y_min) / (y_max - y_min) * h
        return px, py

    svg.append(f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#888"/>')
    svg.append(f'<text x="{x0 + 4}" y="{y0 + 14}" font-size="12" fill="#333">{title}</text>')
    svg.append(
        f'<text x="{x0}" y="{y0 + h + 14}" font-size="10" fill="#333">{lo:.4g}</text>'
        f'<text x="{x0 + w - 30}" y="{y0 + h + 14}" font-size="10" fill="#333">{hi:.4g}</text>'
        f'<text x="{x0 - 4}" y="{y0 + h}" font-size="10" fill="#333" text-anchor="end">{y_min:.4g}</text>'
        f'<text x="{x0 - 4}" y="{y0 + 10}" font-size="10" fill="#333" text-anchor="end">{y_max:.4g}</text>'
    )
    svg.append(f'<path d="{_svg_path(ts, ys, to_px)}" fill="none" stroke="#0057b8" stroke-width="1.5"/>')
    for t, a in data_points:
        px, py = to_px(t, a)
        svg.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3" fill="#d62728"/>')


def write_plot_svg(curve, data_points, path) -> None:
    dens = cdf_mod.density(curve)
    svg = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" width="900" height="380" viewBox="0 0 900 380">',
        '<rect width="900" height="380" fill="white"/>',
    ]
    _panel(svg, curve, data_points, 50, 20, 360, 320, "fitted curve")
    _panel(svg, dens, [], 500, 20, 360, 320, "density (first derivative)")
    svg.append("</svg>")
    Path(path).write_text("\n".join(svg) + "\n", encoding="utf-8")


def cmd_plot(args) -> int:
    curve = spline_mod.read_json(args.spline)
    data_points = []
    if args.data:
        data_points = [(p.t, p.alpha) for p in load_csv(args.data)]
    write_plot_svg(curve, data_points, args.out)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="monosmooth",
        description="Monotone, bounded smoothing spline fitting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_solver_flags(p):
        p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                       help="data-fidelity multiplier (default: 1.0)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="solver parallelism (default: 1)")
        p.add_argument("--max-nodes", type=int, default=100_000,
                       help="branch-and-bound node budget (default: 100000)")
        p.add_argument("--tol", type=float, default=1e-6,
                       help="optimality gap tolerance (default: 1e-6)")

    p_fit = sub.add_parser("fit", help="fit a monotone bounded spline to CSV data")
    p_fit.add_argument("--input", required=True, help="CSV with header t,alpha[,weight]")
    p_fit.add_argument("--xmax", type=float, required=True,
                       help="upper bound on the curve (required; no infinity sentinel)")
    p_fit.add_argument("--boundary", choices=["pinned", "free"], default="pinned",
                       help="pinned: curve starts at (0, 0); free: start value >= 0 (default: pinned)")
    p_fit.add_argument("--weights-column", default="weight",
                       help="CSV column with fit weights (default: 'weight')")
    add_solver_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_cdf = sub.add_parser("cdf", help="estimate a CDF (and density) from samples")
    src = p_cdf.add_mutually_exclusive_group(required=True)
    src.add_argument("--samples", help="CSV with one sample per line")
    src.add_argument("--histogram", help="CSV with header edge_left,edge_right,count")
    p_cdf.add_argument("--bins", type=int, default=20, help="number of equal bins (default: 20)")
    add_solver_flags(p_cdf)
    p_cdf.set_defaults(func=cmd_cdf)

    p_eval = sub.add_parser("eval", help="evaluate a saved spline")
    p_eval.add_argument("--spline", required=True, help="spline.json produced by fit/cdf")
    p_eval.add_argument("--at", action="append", required=True,
                        help="abscissa to evaluate (repeatable)")
    p_eval.add_argument("--clamp", action="store_true", help="clamp out-of-domain abscissae")
    p_eval.add_argument("--out", help="write CSV here instead of stdout")
    p_eval.set_defaults(func=cmd_eval)

    p_plot = sub.add_parser("plot", help="render curve, data, and density to SVG")
    p_plot.add_argument("--spline", required=True, help="spline.json produced by fit/cdf")
    p_plot.add_argument("--data", help="optional data CSV to overlay")
    p_plot.add_argument("--out", required=True, help="output SVG path")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (MonosmoothError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
