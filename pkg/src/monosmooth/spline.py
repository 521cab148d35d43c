"""Piecewise-cubic curves: evaluation, serialization, dense sampling.

A SplineCurve is a list of cubic segments aligned with consecutive gaps of a
strictly increasing breakpoint sequence.  Coefficients are stored in local
coordinates (t - t_start of the segment), which keeps evaluation well
conditioned for large abscissae.  Evaluation at a breakpoint uses the segment
to its right; fitted curves are C1 there, so the choice is observable only
for second derivatives and for derivative curves.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import SplineFormatError
from .interval import CubicSegment

#: Relative tolerance for value continuity across internal breakpoints.
CONTINUITY_RTOL = 1e-10


@dataclass(frozen=True)
class SplineCurve:
    """Piecewise cubic polynomial over [breakpoints[0], breakpoints[-1]]."""

    breakpoints: tuple[float, ...]
    segments: tuple[CubicSegment, ...]

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if len(self.segments) == 0:
            raise SplineFormatError("curve must have at least one segment")
        if bp.size != len(self.segments) + 1:
            raise SplineFormatError(
                f"{bp.size} breakpoints do not align with {len(self.segments)} segments"
            )
        if np.any(np.diff(bp) <= 0):
            raise SplineFormatError("breakpoints must be strictly increasing")
        scale = float(np.max(np.abs([_poly_val(s, 0.0) for s in self.segments]))) + 1.0
        for k in range(len(self.segments) - 1):
            left = _poly_val(self.segments[k], bp[k + 1] - bp[k])
            right = _poly_val(self.segments[k + 1], 0.0)
            if abs(left - right) > CONTINUITY_RTOL * scale:
                raise SplineFormatError(
                    f"value discontinuity {left - right:.3e} at breakpoint {bp[k + 1]}"
                )

    @property
    def domain(self) -> tuple[float, float]:
        return self.breakpoints[0], self.breakpoints[-1]


def _poly_val(seg: CubicSegment, s: float, order: int = 0) -> float:
    if order == 0:
        return seg.c0 + s * (seg.c1 + s * (seg.c2 + s * seg.c3))
    if order == 1:
        return seg.c1 + s * (2.0 * seg.c2 + s * 3.0 * seg.c3)
    if order == 2:
        return 2.0 * seg.c2 + 6.0 * seg.c3 * s
    raise ValueError(f"order must be 0, 1, or 2, got {order}")


def eval_curve(curve: SplineCurve, t: float, order: int = 0, clamp: bool = False) -> float:
    """Value (order 0) or first/second derivative of the curve at t.

    Outside the domain, raises ValueError unless ``clamp`` is set, in which
    case t is clamped to the nearest endpoint first (CDF tail behavior).
    """
    lo, hi = curve.domain
    if t < lo or t > hi:
        if not clamp:
            raise ValueError(f"t={t} outside domain [{lo}, {hi}]")
        t = min(max(t, lo), hi)
    bp = curve.breakpoints
    k = int(np.searchsorted(bp, t, side="right")) - 1
    k = min(max(k, 0), len(curve.segments) - 1)
    return _poly_val(curve.segments[k], t - bp[k], order)


def sample_curve(curve: SplineCurve, ts: np.ndarray, clamp: bool = False) -> np.ndarray:
    """Evaluate value, first and second derivative at many points.

    Returns an array of shape (len(ts), 3) with columns (x, dx, ddx).
    """
    ts = np.asarray(ts, dtype=float)
    out = np.empty((ts.size, 3))
    for i, t in enumerate(ts.ravel()):
        for order in range(3):
            out[i, order] = eval_curve(curve, float(t), order, clamp=clamp)
    return out


def derivative_min(curve: SplineCurve, samples_per_segment: int = 64) -> float:
    """Minimum of the first derivative over a dense per-segment grid."""
    worst = np.inf
    bp = curve.breakpoints
    for k, seg in enumerate(curve.segments):
        width = bp[k + 1] - bp[k]
        ss = np.linspace(0.0, width, samples_per_segment)
        d = seg.c1 + ss * (2.0 * seg.c2 + ss * 3.0 * seg.c3)
        worst = min(worst, float(d.min()))
    return worst


def c1_defect(curve: SplineCurve) -> tuple[float, float]:
    """Largest (value, derivative) mismatch across internal breakpoints."""
    bp = curve.breakpoints
    dval = 0.0
    dder = 0.0
    for k in range(len(curve.segments) - 1):
        width = bp[k + 1] - bp[k]
        dval = max(dval, abs(_poly_val(curve.segments[k], width) - _poly_val(curve.segments[k + 1], 0.0)))
        dder = max(dder, abs(_poly_val(curve.segments[k], width, 1) - _poly_val(curve.segments[k + 1], 0.0, 1)))
    return dval, dder


def serialize(curve: SplineCurve) -> dict:
    """JSON-ready document; floats survive a round trip bit-exactly."""
    return {
        "breakpoints": list(curve.breakpoints),
        "segments": [
            {"c0": s.c0, "c1": s.c1, "c2": s.c2, "c3": s.c3} for s in curve.segments
        ],
    }


def deserialize(document: dict | str) -> SplineCurve:
    """Rebuild a curve from ``serialize`` output (dict or JSON text)."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SplineFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise SplineFormatError(f"expected an object, got {type(document).__name__}")
    try:
        bps = [float(b) for b in document["breakpoints"]]
        raw_segments = document["segments"]
    except (KeyError, TypeError, ValueError) as exc:
        raise SplineFormatError(f"missing or malformed field: {exc}") from exc
    if len(raw_segments) == 0:
        raise SplineFormatError("empty segment list")
    if len(bps) != len(raw_segments) + 1:
        raise SplineFormatError("breakpoints do not align with segments")
    segments = []
    for k, raw in enumerate(raw_segments):
        try:
            segments.append(
                CubicSegment(
                    bps[k], bps[k + 1],
                    float(raw["c0"]), float(raw["c1"]), float(raw["c2"]), float(raw["c3"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SplineFormatError(f"segment {k}: {exc}") from exc
    return SplineCurve(tuple(bps), tuple(segments))


def dumps(curve: SplineCurve) -> str:
    return json.dumps(serialize(curve), indent=2)


def write_json(curve: SplineCurve, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(curve))
        fh.write("\n")


def read_json(path) -> SplineCurve:
    with open(path, encoding="utf-8") as fh:
        return deserialize(fh.read())


def write_samples_csv(curve: SplineCurve, path, n: int = 400) -> None:
    """Dense-sample export with header ``t,x,dx,ddx``."""
    lo, hi = curve.domain
    ts = np.linspace(lo, hi, n)
    vals = sample_curve(curve, ts)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,x,dx,ddx\n")
        for t, (x, dx, ddx) in zip(ts, vals):
            fh.write(f"{float(t)!r},{float(x)!r},{float(dx)!r},{float(ddx)!r}\n")
