"""CDF estimation: samples or histogram counts to a monotone spline in [0, 1].

Raw samples are binned, cumulative counts are normalized at bin right edges
(cumulative counts are exact there, so no half-bin bias), and the resulting
targets are fitted with x_max = 1 under the free-start boundary: a CDF over
a sampled range need not start at zero at its left edge.  Differentiating
the fitted spline yields a density estimate, nonnegative because the fit is
monotone.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .interval import CubicSegment
from .problem import BoundaryMode, DataPoint, ProblemSpec, validate
from .spline import SplineCurve


@dataclass(frozen=True)
class HistogramSpec:
    """Bin edges (strictly increasing) and nonnegative integer counts."""

    edges: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.edges) != len(self.counts) + 1:
            raise ValidationError(
                f"{len(self.edges)} edges do not delimit {len(self.counts)} bins"
            )
        if any(e2 <= e1 for e1, e2 in zip(self.edges, self.edges[1:])):
            raise ValidationError("bin edges must be strictly increasing")
        if any(c < 0 for c in self.counts):
            raise ValidationError("bin counts must be nonnegative")
        if sum(self.counts) <= 0:
            raise ValidationError("histogram is empty")


def histogram_to_cdf_data(hist: HistogramSpec, lam: float = 50.0) -> ProblemSpec:
    """Cumulative fractions at bin right edges as a free-start fit, x_max = 1."""
    total = float(sum(hist.counts))
    cumulative = np.cumsum(hist.counts) / total
    data = tuple(
        DataPoint(float(edge), float(frac), 1.0)
        for edge, frac in zip(hist.edges[1:], cumulative)
    )
    return validate(
        ProblemSpec(data=data, x_max=1.0, lam=float(lam), boundary=BoundaryMode.FREE_START)
    )


def samples_to_cdf_data(samples, bins: int, lam: float = 50.0) -> ProblemSpec:
    """Bin raw samples into equal-width bins and build the CDF fit spec."""
    values = np.asarray(list(samples), dtype=float)
    if values.size < 2:
        raise ValidationError("need at least two samples")
    if bins < 2:
        raise ValidationError("need at least two bins")
    if not np.all(np.isfinite(values)):
        raise ValidationError("samples must be finite")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        raise ValidationError("degenerate sample set: all values identical")
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    hist = HistogramSpec(tuple(float(e) for e in edges), tuple(int(c) for c in counts))
    return histogram_to_cdf_data(hist, lam=lam)


def density(curve: SplineCurve) -> SplineCurve:
    """Derivative curve, stored as cubic segments with zero cubic term.

    For a monotone input the result is nonnegative, and its per-segment
    antiderivatives integrate exactly to curve(T) - curve(t_0).
    """
    segments = tuple(
        CubicSegment(s.t_start, s.t_end, s.c1, 2.0 * s.c2, 3.0 * s.c3, 0.0)
        for s in curve.segments
    )
    return SplineCurve(curve.breakpoints, segments)


def integrate(curve: SplineCurve) -> float:
    """Exact integral over the domain via per-segment antiderivatives."""
    total = 0.0
    for k, s in enumerate(curve.segments):
        w = curve.breakpoints[k + 1] - curve.breakpoints[k]
        total += w * (s.c0 + w * (s.c1 / 2.0 + w * (s.c2 / 3.0 + w * s.c3 / 4.0)))
    return total


def load_samples_csv(path) -> np.ndarray:
    """One numeric value per line (a ``value`` header line is tolerated)."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or (line_no == 1 and text.lower() in ("value", "sample", "x")):
                continue
            try:
                out.append(float(text))
            except ValueError as exc:
                raise ValidationError(f"{path}:{line_no}: not a number: {text!r}") from exc
    if not out:
        raise ValidationError(f"{path}: no samples")
    return np.asarray(out)


def load_histogram_csv(path) -> HistogramSpec:
    """Histogram rows ``edge_left,edge_right,count`` with that header."""
    edges: list[float] = []
    counts: list[int] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"edge_left", "edge_right", "count"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValidationError(f"{path}: expected CSV header 'edge_left,edge_right,count'")
        for row_no, row in enumerate(reader, start=2):
            try:
                left, right = float(row["edge_left"]), float(row["edge_right"])
                count = int(row["count"])
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{path}:{row_no}: bad row ({exc})") from exc
            if edges and left != edges[-1]:
                raise ValidationError(f"{path}:{row_no}: bins must be contiguous")
            if not edges:
                edges.append(left)
            edges.append(right)
            counts.append(count)
    if not counts:
        raise ValidationError(f"{path}: no histogram rows")
    return HistogramSpec(tuple(edges), tuple(counts))
