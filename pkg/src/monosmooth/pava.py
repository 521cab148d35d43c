"""Pool-adjacent-violators fits and projections onto monotone feasible sets.

The Euclidean projection onto { x : x_0 <= x_1 <= ... <= x_{n-1} } is the
classic isotonic regression, computed by PAV in O(n).  Projection onto the
intersection with box bounds is the isotonic fit clipped to the box, which is
what both the knot-space solver and the grid oracle use to stay feasible.
"""

from __future__ import annotations

import numpy as np


def isotonic_fit(y: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """Weighted least-squares nondecreasing fit to y (PAV, O(n))."""
    y = np.asarray(y, dtype=float)
    n = y.size
    if n == 0:
        return y.copy()
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)

    # Stack of blocks (weighted mean, total weight, start index).
    means = np.empty(n)
    wsums = np.empty(n)
    starts = np.empty(n, dtype=np.intp)
    top = -1
    for i in range(n):
        top += 1
        means[top] = y[i]
        wsums[top] = w[i]
        starts[top] = i
        while top > 0 and means[top - 1] >= means[top]:
            total = wsums[top - 1] + wsums[top]
            means[top - 1] = (wsums[top - 1] * means[top - 1] + wsums[top] * means[top]) / total
            wsums[top - 1] = total
            top -= 1

    out = np.empty(n)
    for b in range(top + 1):
        end = starts[b + 1] if b < top else n
        out[starts[b]:end] = means[b]
    return out


def project_monotone_box(
    y: np.ndarray,
    lower: float | None = None,
    upper: float | None = None,
) -> np.ndarray:
    """Euclidean projection onto {nondecreasing} intersected with [lower, upper]."""
    x = isotonic_fit(y)
    if lower is not None or upper is not None:
        lo = -np.inf if lower is None else lower
        hi = np.inf if upper is None else upper
        np.clip(x, lo, hi, out=x)
    return x
