"""Fitting-problem definition: data points, bounds, knot layout, validation.

The fitting problem is: find the curve x minimizing

    (1/2) * integral of xddot(t)^2  +  (lam/2) * sum_i w_i * (x(t_i) - alpha_i)^2

subject to x nondecreasing, x(T) <= x_max, and (in pinned mode) x(0) = 0.
Under ``PINNED_ZERO`` the origin knot t=0 carries no data term and all data
abscissae must be positive; under ``FREE_START`` the first knot is the first
data abscissa and the curve's starting value is only constrained to be >= 0.

Units are caller-defined.  The objective is not invariant under rescaling of
t or x, so no internal normalization is performed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError


class BoundaryMode(Enum):
    PINNED_ZERO = "pinned"
    FREE_START = "free"


@dataclass(frozen=True)
class DataPoint:
    """One observation (t, alpha) with a positive fit weight."""

    t: float
    alpha: float
    weight: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.t) and math.isfinite(self.alpha)):
            raise ValidationError(f"non-finite data point ({self.t}, {self.alpha})")
        if not (math.isfinite(self.weight) and self.weight > 0):
            raise ValidationError(f"weight must be positive and finite, got {self.weight}")


@dataclass(frozen=True)
class ProblemSpec:
    """Immutable description of one fitting problem.

    ``data`` must be ordered by strictly increasing abscissa; ``validate``
    rejects unsorted input rather than silently sorting it.  ``T`` is the
    right endpoint and always equals the last data abscissa.
    """

    data: tuple[DataPoint, ...]
    x_max: float
    lam: float
    boundary: BoundaryMode = BoundaryMode.PINNED_ZERO
    T: float = 0.0

    @property
    def knots(self) -> tuple[float, ...]:
        """Knot abscissae: data sites, preceded by t=0 in pinned mode."""
        ts = tuple(p.t for p in self.data)
        if self.boundary is BoundaryMode.PINNED_ZERO:
            return (0.0,) + ts
        return ts

    @property
    def n_knots(self) -> int:
        return len(self.data) + (1 if self.boundary is BoundaryMode.PINNED_ZERO else 0)

    @property
    def n_intervals(self) -> int:
        return self.n_knots - 1

    def data_index_of_knot(self, k: int) -> int | None:
        """Index into ``data`` of knot k, or None for the pinned origin knot."""
        if self.boundary is BoundaryMode.PINNED_ZERO:
            return k - 1 if k >= 1 else None
        return k

    def knot_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(knots, per-knot data weight, per-knot target); weight 0 marks no data."""
        knots = np.asarray(self.knots, dtype=float)
        w = np.zeros_like(knots)
        a = np.zeros_like(knots)
        off = 1 if self.boundary is BoundaryMode.PINNED_ZERO else 0
        for j, p in enumerate(self.data):
            w[off + j] = p.weight
            a[off + j] = p.alpha
        return knots, w, a


def validate(spec: ProblemSpec) -> ProblemSpec:
    """Check all invariants and return the canonical (normalized) spec.

    Idempotent: validating an already-canonical spec returns an equal spec.

    Raises ValidationError for: empty data, nonpositive lam/x_max/weights,
    non-increasing abscissae (duplicates or unsorted input), and, in pinned
    mode, a data abscissa at or below the pinned knot t=0.
    """
    if len(spec.data) == 0:
        raise ValidationError("empty data set")
    if not (math.isfinite(spec.x_max) and spec.x_max > 0):
        raise ValidationError(f"x_max must be positive and finite, got {spec.x_max}")
    if not (math.isfinite(spec.lam) and spec.lam > 0):
        raise ValidationError(f"lambda must be positive and finite, got {spec.lam}")

    ts = [p.t for p in spec.data]
    for i in range(1, len(ts)):
        if ts[i] == ts[i - 1]:
            raise ValidationError(f"duplicate abscissa t={ts[i]}")
        if ts[i] < ts[i - 1]:
            raise ValidationError(
                f"abscissae must be strictly increasing, got {ts[i - 1]} before {ts[i]}"
            )

    if spec.boundary is BoundaryMode.PINNED_ZERO:
        if ts[0] == 0.0:
            raise ValidationError("data abscissa collides with the pinned knot t=0")
        if ts[0] < 0.0:
            raise ValidationError("pinned mode requires all abscissae > 0")
    elif len(ts) < 2:
        raise ValidationError("free-start mode needs at least two data sites (no origin knot is added)")

    canonical = replace(spec, data=tuple(spec.data), T=float(ts[-1]))
    return canonical


@dataclass(frozen=True)
class KnotVector:
    """Decision variables of the finite-dimensional problem.

    Values x_i and slopes v_i at each knot.  A feasible KnotVector has
    nondecreasing values, nonnegative slopes, x_m <= x_max, and x_0 = 0 in
    pinned mode; feasibility is checked by ``objective.feasible``, not here.
    """

    knots: tuple[float, ...]
    values: tuple[float, ...]
    slopes: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.knots) == len(self.values) == len(self.slopes)):
            raise ValidationError("knots, values, slopes must have equal length")
        if len(self.knots) < 2:
            raise ValidationError("a KnotVector needs at least two knots")
        kn = np.asarray(self.knots, dtype=float)
        if np.any(np.diff(kn) <= 0):
            raise ValidationError("knot abscissae must be strictly increasing")

    @classmethod
    def from_arrays(cls, knots, values, slopes) -> "KnotVector":
        return cls(
            tuple(float(t) for t in knots),
            tuple(float(x) for x in values),
            tuple(float(v) for v in slopes),
        )

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            np.asarray(self.knots, dtype=float),
            np.asarray(self.values, dtype=float),
            np.asarray(self.slopes, dtype=float),
        )


def load_csv(path, weights_column: str = "weight") -> list[DataPoint]:
    """Read data points from a CSV file with header ``t,alpha[,weight]``.

    The weight column is optional and defaults to 1.0; ``weights_column``
    selects an alternative column name.  UTF-8, '.' decimal separator.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "t" not in reader.fieldnames or "alpha" not in reader.fieldnames:
            raise ValidationError(f"{path}: expected CSV header with columns 't,alpha[,weight]'")
        has_w = weights_column in reader.fieldnames
        points = []
        for row_no, row in enumerate(reader, start=2):
            try:
                t = float(row["t"])
                alpha = float(row["alpha"])
                w = float(row[weights_column]) if has_w and row[weights_column] not in (None, "") else 1.0
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{path}:{row_no}: bad numeric value ({exc})") from exc
            points.append(DataPoint(t, alpha, w))
    if not points:
        raise ValidationError(f"{path}: no data rows")
    return points


def make_spec(
    points: Iterable[DataPoint] | Sequence[tuple],
    x_max: float,
    lam: float,
    boundary: BoundaryMode = BoundaryMode.PINNED_ZERO,
) -> ProblemSpec:
    """Build and validate a ProblemSpec; tuples are coerced to DataPoint."""
    data = tuple(p if isinstance(p, DataPoint) else DataPoint(*p) for p in points)
    return validate(ProblemSpec(data=data, x_max=float(x_max), lam=float(lam), boundary=boundary))
